// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxlift/core.hpp"

namespace voxlift {

// Pre-activation value giving softplus(v) ~ 1e-13, i.e. an empty cell.
inline constexpr double kEmptyDensityParam = -30.0;

// Trainable volumetric field on a dense trilinear lattice. Density params are
// pre-softplus, color params pre-sigmoid. Lattice storage is x-fastest;
// color is kept as three consecutive scalar lattices (R, G, B).
struct RadianceField {
    int nx = 0, ny = 0, nz = 0;  // lattice nodes per axis, >= 2
    Aabb bounds;
    Vec3 background{1.0, 1.0, 1.0};  // rgb in [0,1]
    std::vector<double> density;     // nx*ny*nz
    std::vector<double> color;       // 3 * nx*ny*nz, channel-planar

    size_t node_count() const { return static_cast<size_t>(nx) * ny * nz; }
    size_t node_index(int i, int j, int k) const {
        return (static_cast<size_t>(k) * ny + j) * nx + i;
    }
    double& color_at(int ch, size_t node) { return color[ch * node_count() + node]; }
    double color_at(int ch, size_t node) const { return color[ch * node_count() + node]; }

    Vec3 voxel_size() const {
        Vec3 e = bounds.extent();
        return {e.x / (nx - 1), e.y / (ny - 1), e.z / (nz - 1)};
    }
};

inline RadianceField make_field(int nx, int ny, int nz, const Aabb& bounds,
                                Vec3 background = {1.0, 1.0, 1.0},
                                double density_param = kEmptyDensityParam,
                                double color_param = 0.0) {
    if (nx < 2 || ny < 2 || nz < 2)
        throw InvalidConfigError("field resolution must be >= 2 per axis");
    RadianceField f;
    f.nx = nx; f.ny = ny; f.nz = nz;
    f.bounds = bounds;
    f.background = background;
    f.density.assign(f.node_count(), density_param);
    f.color.assign(3 * f.node_count(), color_param);
    return f;
}

inline RadianceField make_field(int resolution, const Aabb& bounds = {},
                                Vec3 background = {1.0, 1.0, 1.0}) {
    return make_field(resolution, resolution, resolution, bounds, background);
}

// Trilinear cell lookup shared by the renderer and its backward pass.
struct TrilinearCell {
    size_t corner[8];
    double weight[8];
};

// Local cell and corner weights for an in-bounds point.
inline TrilinearCell locate_cell(const RadianceField& f, const Vec3& p) {
    auto axis = [](double v, double lo, double hi, int n) {
        double u = (v - lo) / (hi - lo) * (n - 1);
        int i0 = static_cast<int>(std::floor(u));
        i0 = std::clamp(i0, 0, n - 2);
        double t = std::clamp(u - i0, 0.0, 1.0);
        return std::pair<int, double>{i0, t};
    };
    auto [ix, tx] = axis(p.x, f.bounds.lo.x, f.bounds.hi.x, f.nx);
    auto [iy, ty] = axis(p.y, f.bounds.lo.y, f.bounds.hi.y, f.ny);
    auto [iz, tz] = axis(p.z, f.bounds.lo.z, f.bounds.hi.z, f.nz);

    TrilinearCell cell;
    int n = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                cell.corner[n] = f.node_index(ix + dx, iy + dy, iz + dz);
                cell.weight[n] = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) *
                                 (dz ? tz : 1.0 - tz);
                ++n;
            }
    return cell;
}

// Interpolated pre-activation values at an in-bounds point.
inline void interpolate_raw(const RadianceField& f, const TrilinearCell& cell,
                            double& raw_density, double raw_color[3]) {
    raw_density = 0.0;
    raw_color[0] = raw_color[1] = raw_color[2] = 0.0;
    size_t nodes = f.node_count();
    for (int i = 0; i < 8; ++i) {
        double w = cell.weight[i];
        size_t idx = cell.corner[i];
        raw_density += w * f.density[idx];
        raw_color[0] += w * f.color[idx];
        raw_color[1] += w * f.color[nodes + idx];
        raw_color[2] += w * f.color[2 * nodes + idx];
    }
}

struct FieldSample {
    double density = 0.0;  // activated, >= 0
    Vec3 color;            // activated, in [0,1]^3
};

// Activated density/color at a world point. Outside the bounds the field is
// empty and reads back the background color.
inline FieldSample query_field(const RadianceField& f, const Vec3& p) {
    if (!is_finite(p)) throw InvalidInputError("query_field: non-finite point");
    if (!f.bounds.contains(p)) return {0.0, f.background};
    TrilinearCell cell = locate_cell(f, p);
    double raw_d, raw_c[3];
    interpolate_raw(f, cell, raw_d, raw_c);
    FieldSample s;
    s.density = softplus(raw_d);
    s.color = {sigmoid(raw_c[0]), sigmoid(raw_c[1]), sigmoid(raw_c[2])};
    return s;
}

// Activated density only (used for normal estimation); 0 outside bounds.
inline double query_density(const RadianceField& f, const Vec3& p) {
    if (!f.bounds.contains(p)) return 0.0;
    TrilinearCell cell = locate_cell(f, p);
    double raw = 0.0;
    for (int i = 0; i < 8; ++i) raw += cell.weight[i] * f.density[cell.corner[i]];
    return softplus(raw);
}

// ---------------------------------------------------------------------------
// Checkpoint format: text header, then raw little-endian f32 lattices
// (density, then color planes R,G,B), x-fastest.
//
//   VOXFIELD 1
//   resolution <nx> <ny> <nz>
//   bounds <lox> <loy> <loz> <hix> <hiy> <hiz>
//   background <r> <g> <b>
//   data
//   <binary payload>

inline void save_field(const RadianceField& f, std::ostream& out) {
    out.precision(17);
    out << "VOXFIELD 1\n";
    out << "resolution " << f.nx << " " << f.ny << " " << f.nz << "\n";
    out << "bounds " << f.bounds.lo.x << " " << f.bounds.lo.y << " " << f.bounds.lo.z
        << " " << f.bounds.hi.x << " " << f.bounds.hi.y << " " << f.bounds.hi.z << "\n";
    out << "background " << f.background.x << " " << f.background.y << " "
        << f.background.z << "\n";
    out << "data\n";
    auto write_lattice = [&out](const std::vector<double>& v, size_t off, size_t n) {
        std::vector<float> buf(n);
        for (size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(v[off + i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(n * sizeof(float)));
    };
    size_t nodes = f.node_count();
    write_lattice(f.density, 0, nodes);
    for (int c = 0; c < 3; ++c) write_lattice(f.color, c * nodes, nodes);
    if (!out) throw FormatError("save_field: write failed");
}

inline void save_field(const RadianceField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_field: cannot open " + path);
    save_field(f, out);
}

inline RadianceField load_field(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "VOXFIELD 1")
        throw FormatError("load_field: bad magic/version line");

    int nx = 0, ny = 0, nz = 0;
    Aabb bounds;
    Vec3 bg;
    bool have_res = false, have_bounds = false, have_bg = false;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "resolution") {
            ls >> nx >> ny >> nz;
            have_res = !ls.fail();
        } else if (key == "bounds") {
            ls >> bounds.lo.x >> bounds.lo.y >> bounds.lo.z
               >> bounds.hi.x >> bounds.hi.y >> bounds.hi.z;
            have_bounds = !ls.fail();
        } else if (key == "background") {
            ls >> bg.x >> bg.y >> bg.z;
            have_bg = !ls.fail();
        } else {
            throw FormatError("load_field: unknown header key '" + key + "'");
        }
    }
    if (!have_res || !have_bounds || !have_bg)
        throw FormatError("load_field: incomplete header");
    if (nx < 2 || ny < 2 || nz < 2)
        throw FormatError("load_field: invalid resolution");

    RadianceField f = make_field(nx, ny, nz, bounds, bg);
    auto read_lattice = [&in](std::vector<double>& v, size_t off, size_t n) {
        std::vector<float> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != n * sizeof(float))
            throw FormatError("load_field: truncated payload");
        for (size_t i = 0; i < n; ++i) v[off + i] = buf[i];
    };
    size_t nodes = f.node_count();
    read_lattice(f.density, 0, nodes);
    for (int c = 0; c < 3; ++c) read_lattice(f.color, c * nodes, nodes);
    return f;
}

inline RadianceField load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_field: cannot open " + path);
    return load_field(in);
}

// ---------------------------------------------------------------------------
// Occupancy grid import: text header, then one raw byte per cell (0 = empty,
// nonzero = occupied), x-fastest. Occupied cells get a fixed solid
// pre-activation density level; color initializes to mid gray.
//
//   VOXOCC 1
//   resolution <nx> <ny> <nz>
//   bounds <lox> <loy> <loz> <hix> <hiy> <hiz>
//   data
//   <binary payload>

inline constexpr double kOccupiedDensityParam = 8.0;

inline RadianceField load_occupancy_as_field(std::istream& in,
                                             Vec3 background = {1.0, 1.0, 1.0}) {
    std::string line;
    if (!std::getline(in, line) || line != "VOXOCC 1")
        throw FormatError("load_occupancy: bad magic/version line");
    int nx = 0, ny = 0, nz = 0;
    Aabb bounds;
    bool have_res = false, have_bounds = false;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "resolution") {
            ls >> nx >> ny >> nz;
            have_res = !ls.fail();
        } else if (key == "bounds") {
            ls >> bounds.lo.x >> bounds.lo.y >> bounds.lo.z
               >> bounds.hi.x >> bounds.hi.y >> bounds.hi.z;
            have_bounds = !ls.fail();
        } else {
            throw FormatError("load_occupancy: unknown header key '" + key + "'");
        }
    }
    if (!have_res || !have_bounds)
        throw FormatError("load_occupancy: incomplete header");
    if (nx < 2 || ny < 2 || nz < 2)
        throw FormatError("load_occupancy: invalid resolution");

    RadianceField f = make_field(nx, ny, nz, bounds, background);
    std::vector<uint8_t> buf(f.node_count());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size())
        throw FormatError("load_occupancy: truncated payload");
    for (size_t i = 0; i < buf.size(); ++i)
        f.density[i] = buf[i] ? kOccupiedDensityParam : kEmptyDensityParam;
    return f;
}

inline void save_occupancy(const std::vector<uint8_t>& occ, int nx, int ny, int nz,
                           const Aabb& bounds, std::ostream& out) {
    if (occ.size() != static_cast<size_t>(nx) * ny * nz)
        throw InvalidInputError("save_occupancy: size mismatch");
    out.precision(17);
    out << "VOXOCC 1\n";
    out << "resolution " << nx << " " << ny << " " << nz << "\n";
    out << "bounds " << bounds.lo.x << " " << bounds.lo.y << " " << bounds.lo.z
        << " " << bounds.hi.x << " " << bounds.hi.y << " " << bounds.hi.z << "\n";
    out << "data\n";
    out.write(reinterpret_cast<const char*>(occ.data()),
              static_cast<std::streamsize>(occ.size()));
}

}  // namespace voxlift
