// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxlift/oracle.hpp"

namespace voxlift {

// Wire protocol "voxlift-oracle/1" for out-of-process guidance backends,
// spoken over a local (unix-domain) stream socket. One request per
// connection. Requests and responses are a block of text header lines
// followed by a raw little-endian float32 payload:
//
//   voxlift-oracle/1 <op>          op: hello | predict | generate
//   width <w> / height <h> / channels <c>   (image shape, predict/generate)
//   t <timestep>
//   prompt <text>                  (may be empty after the space)
//   condition <0|1>                (predict: whether a condition follows x_t)
//   camera <azimuth> <elevation> <distance> <fov>   (optional)
//   seed <u64>
//   payload <nbytes>
//   <payload bytes>
//
// Responses echo the version tag with "ok" or "error <message>"; ok
// responses carry shape lines and a payload. "hello" answers capability
// lines (supports_condition / supports_text) and an empty payload.

namespace wire {

inline constexpr const char* kVersionTag = "voxlift-oracle/1";

inline void write_all(int fd, const void* data, size_t n) {
    const char* p = static_cast<const char*>(data);
    while (n > 0) {
        ssize_t k = ::write(fd, p, n);
        if (k <= 0) throw BackendError("oracle socket: write failed");
        p += k;
        n -= static_cast<size_t>(k);
    }
}

inline void read_exact(int fd, void* data, size_t n) {
    char* p = static_cast<char*>(data);
    while (n > 0) {
        ssize_t k = ::read(fd, p, n);
        if (k <= 0) throw BackendError("oracle socket: connection closed mid-read");
        p += k;
        n -= static_cast<size_t>(k);
    }
}

inline std::string read_line(int fd) {
    std::string line;
    char ch;
    while (true) {
        ssize_t k = ::read(fd, &ch, 1);
        if (k <= 0) throw BackendError("oracle socket: connection closed mid-line");
        if (ch == '\n') break;
        line.push_back(ch);
        if (line.size() > 1 << 16)
            throw BackendError("oracle socket: oversized header line");
    }
    return line;
}

inline void write_text(int fd, const std::string& s) { write_all(fd, s.data(), s.size()); }

inline void write_image_payload(int fd, const Image& img) {
    std::vector<float> buf(img.size());
    for (size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img.data[i]);
    write_text(fd, "payload " + std::to_string(buf.size() * sizeof(float)) + "\n");
    if (!buf.empty()) write_all(fd, buf.data(), buf.size() * sizeof(float));
}

inline void read_floats(int fd, size_t nbytes, std::vector<double>& out) {
    if (nbytes % sizeof(float) != 0)
        throw BackendError("oracle socket: payload not float-aligned");
    std::vector<float> buf(nbytes / sizeof(float));
    if (!buf.empty()) read_exact(fd, buf.data(), nbytes);
    out.resize(buf.size());
    for (size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
}

struct Header {
    std::string op;
    std::map<std::string, std::string> fields;
    size_t payload_bytes = 0;

    int geti(const char* key) const {
        auto it = fields.find(key);
        if (it == fields.end())
            throw BackendError(std::string("oracle socket: missing field ") + key);
        return std::stoi(it->second);
    }
    std::string gets(const char* key, const std::string& fallback = "") const {
        auto it = fields.find(key);
        return it == fields.end() ? fallback : it->second;
    }
};

inline Header read_header(int fd) {
    std::string first = read_line(fd);
    std::istringstream fs(first);
    std::string tag;
    Header h;
    fs >> tag >> h.op;
    if (tag != kVersionTag)
        throw BackendError("oracle socket: protocol mismatch, got '" + first + "'");
    if (h.op.empty()) throw BackendError("oracle socket: missing op");
    while (true) {
        std::string line = read_line(fd);
        size_t sp = line.find(' ');
        std::string key = sp == std::string::npos ? line : line.substr(0, sp);
        std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "payload") {
            h.payload_bytes = static_cast<size_t>(std::stoull(value));
            break;
        }
        h.fields[key] = value;
    }
    return h;
}

class FdGuard {
public:
    explicit FdGuard(int fd) : fd_(fd) {}
    ~FdGuard() {
        if (fd_ >= 0) ::close(fd_);
    }
    FdGuard(const FdGuard&) = delete;
    FdGuard& operator=(const FdGuard&) = delete;
    int get() const { return fd_; }

private:
    int fd_;
};

}  // namespace wire

// GuidanceOracle adapter that forwards every call to a backend listening on
// a local socket. The core stays free of real diffusion imports; anything
// speaking the protocol can sit on the other end.
class RemoteOracleClient : public GuidanceOracle {
public:
    explicit RemoteOracleClient(std::string socket_path)
        : path_(std::move(socket_path)) {}

    bool supports_condition() const override {
        const_cast<RemoteOracleClient*>(this)->hello();
        return supports_condition_;
    }
    bool supports_text() const override {
        const_cast<RemoteOracleClient*>(this)->hello();
        return supports_text_;
    }

    Image predict_noise(const NoiseRequest& req) override {
        if (!req.x_t) throw BackendError("RemoteOracleClient: missing x_t");
        wire::FdGuard fd(connect_fd());
        std::ostringstream head;
        head << wire::kVersionTag << " predict\n";
        head << "width " << req.x_t->width << "\nheight " << req.x_t->height
             << "\nchannels " << req.x_t->channels << "\n";
        head << "t " << req.t << "\n";
        head << "prompt " << req.prompt << "\n";
        head << "condition " << (req.condition ? 1 : 0) << "\n";
        if (req.camera) {
            head.precision(17);
            head << "camera " << req.camera->azimuth_deg << " "
                 << req.camera->elevation_deg << " " << req.camera->distance << " "
                 << req.camera->fov_deg << "\n";
        }
        head << "seed " << req.seed << "\n";
        wire::write_text(fd.get(), head.str());

        size_t n = req.x_t->size() + (req.condition ? req.condition->size() : 0);
        std::vector<float> buf;
        buf.reserve(n);
        for (double v : req.x_t->data) buf.push_back(static_cast<float>(v));
        if (req.condition) {
            if (req.condition->width != req.x_t->width ||
                req.condition->height != req.x_t->height)
                throw BackendError("RemoteOracleClient: condition shape mismatch");
            for (double v : req.condition->data) buf.push_back(static_cast<float>(v));
        }
        wire::write_text(fd.get(),
                         "payload " + std::to_string(buf.size() * sizeof(float)) + "\n");
        if (!buf.empty())
            wire::write_all(fd.get(), buf.data(), buf.size() * sizeof(float));

        return read_image_response(fd.get());
    }

    Image generate(const std::string& prompt, int t, uint64_t seed) override {
        wire::FdGuard fd(connect_fd());
        std::ostringstream head;
        head << wire::kVersionTag << " generate\n";
        head << "t " << t << "\n";
        head << "prompt " << prompt << "\n";
        head << "seed " << seed << "\n";
        head << "payload 0\n";
        wire::write_text(fd.get(), head.str());
        return read_image_response(fd.get());
    }

private:
    int connect_fd() const {
        int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd < 0) throw BackendError("RemoteOracleClient: socket() failed");
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (path_.size() >= sizeof(addr.sun_path)) {
            ::close(fd);
            throw BackendError("RemoteOracleClient: socket path too long");
        }
        std::strncpy(addr.sun_path, path_.c_str(), sizeof(addr.sun_path) - 1);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd);
            throw BackendError("RemoteOracleClient: cannot connect to " + path_);
        }
        return fd;
    }

    void hello() {
        if (hello_done_) return;
        wire::FdGuard fd(connect_fd());
        wire::write_text(fd.get(),
                         std::string(wire::kVersionTag) + " hello\npayload 0\n");
        wire::Header h = wire::read_header(fd.get());
        if (h.op != "ok") throw BackendError("RemoteOracleClient: hello failed");
        supports_condition_ = h.geti("supports_condition") != 0;
        supports_text_ = h.geti("supports_text") != 0;
        hello_done_ = true;
    }

    Image read_image_response(int fd) {
        wire::Header h = wire::read_header(fd);
        if (h.op == "error")
            throw BackendError("remote oracle error: " + h.gets("message", "unknown"));
        if (h.op != "ok") throw BackendError("remote oracle: unexpected op " + h.op);
        Image out(h.geti("width"), h.geti("height"), h.geti("channels"));
        std::vector<double> vals;
        wire::read_floats(fd, h.payload_bytes, vals);
        if (vals.size() != out.size())
            throw BackendError("remote oracle: payload size mismatch");
        out.data = std::move(vals);
        return out;
    }

    std::string path_;
    bool hello_done_ = false;
    bool supports_condition_ = true;
    bool supports_text_ = true;
};

// Serves a local GuidanceOracle over the wire protocol. Used by adapter
// tests and as a harness for wrapping external backends.
class OracleSocketServer {
public:
    OracleSocketServer(std::string socket_path, GuidanceOracle& backend)
        : path_(std::move(socket_path)), backend_(backend) {
        ::unlink(path_.c_str());
        listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw BackendError("OracleSocketServer: socket() failed");
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (path_.size() >= sizeof(addr.sun_path))
            throw BackendError("OracleSocketServer: socket path too long");
        std::strncpy(addr.sun_path, path_.c_str(), sizeof(addr.sun_path) - 1);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw BackendError("OracleSocketServer: cannot bind " + path_);
        if (::listen(listen_fd_, 8) != 0)
            throw BackendError("OracleSocketServer: listen failed");
    }

    ~OracleSocketServer() {
        if (listen_fd_ >= 0) ::close(listen_fd_);
        ::unlink(path_.c_str());
    }

    // Handles exactly one request (blocking).
    void serve_once() {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) throw BackendError("OracleSocketServer: accept failed");
        wire::FdGuard guard(fd);
        handle(fd);
    }

    // Handles `n` requests; convenient to run on a test thread.
    void serve_n(int n) {
        for (int i = 0; i < n; ++i) serve_once();
    }

    const std::string& path() const { return path_; }

private:
    void handle(int fd) {
        try {
            wire::Header h = wire::read_header(fd);
            if (h.op == "hello") {
                std::ostringstream resp;
                resp << wire::kVersionTag << " ok\n";
                resp << "supports_condition " << (backend_.supports_condition() ? 1 : 0)
                     << "\n";
                resp << "supports_text " << (backend_.supports_text() ? 1 : 0) << "\n";
                resp << "payload 0\n";
                wire::write_text(fd, resp.str());
                return;
            }
            if (h.op == "generate") {
                Image img = backend_.generate(
                    h.gets("prompt"), h.geti("t"),
                    static_cast<uint64_t>(std::stoull(h.gets("seed", "0"))));
                reply_image(fd, img);
                return;
            }
            if (h.op == "predict") {
                Image x_t(h.geti("width"), h.geti("height"), h.geti("channels"));
                bool has_condition = h.geti("condition") != 0;
                std::vector<double> vals;
                wire::read_floats(fd, h.payload_bytes, vals);
                if (vals.size() < x_t.size())
                    throw BackendError("predict payload too small");
                std::copy(vals.begin(), vals.begin() + x_t.size(), x_t.data.begin());
                Image condition;
                if (has_condition) {
                    size_t rest = vals.size() - x_t.size();
                    size_t px = static_cast<size_t>(x_t.width) * x_t.height;
                    if (rest % px != 0)
                        throw BackendError("predict condition payload misaligned");
                    condition = Image(x_t.width, x_t.height, static_cast<int>(rest / px));
                    std::copy(vals.begin() + x_t.size(), vals.end(),
                              condition.data.begin());
                }
                CameraPose camera;
                bool has_camera = h.fields.count("camera") > 0;
                if (has_camera) {
                    std::istringstream cs(h.fields.at("camera"));
                    cs >> camera.azimuth_deg >> camera.elevation_deg >>
                        camera.distance >> camera.fov_deg;
                }
                NoiseRequest req;
                req.x_t = &x_t;
                req.t = h.geti("t");
                req.prompt = h.gets("prompt");
                req.condition = has_condition ? &condition : nullptr;
                req.camera = has_camera ? &camera : nullptr;
                req.seed = static_cast<uint64_t>(std::stoull(h.gets("seed", "0")));
                Image pred = backend_.predict_noise(req);
                reply_image(fd, pred);
                return;
            }
            reply_error(fd, "unknown op " + h.op);
        } catch (const std::exception& e) {
            try {
                reply_error(fd, e.what());
            } catch (...) {
                // client already gone
            }
        }
    }

    void reply_image(int fd, const Image& img) {
        std::ostringstream resp;
        resp << wire::kVersionTag << " ok\n";
        resp << "width " << img.width << "\nheight " << img.height << "\nchannels "
             << img.channels << "\n";
        wire::write_text(fd, resp.str());
        wire::write_image_payload(fd, img);
    }

    void reply_error(int fd, std::string message) {
        std::replace(message.begin(), message.end(), '\n', ' ');
        wire::write_text(fd, std::string(wire::kVersionTag) + " error\nmessage " +
                                 message + "\npayload 0\n");
    }

    std::string path_;
    GuidanceOracle& backend_;
    int listen_fd_ = -1;
};

}  // namespace voxlift
