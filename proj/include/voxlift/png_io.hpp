// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "voxlift/image.hpp"

namespace voxlift {

// 8-bit PNG output; 1-channel images become grayscale, 3-channel RGB.
inline void write_png(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw InvalidInputError("write_png: expected 1 or 3 channels");
    if (img.width < 1 || img.height < 1)
        throw InvalidInputError("write_png: empty image");

    std::vector<uint8_t> bytes(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }

    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw FormatError("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw FormatError("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw FormatError("write_png: libpng failure writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    size_t stride = static_cast<size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) rows[y] = bytes.data() + y * stride;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// Reads an 8- or 16-bit PNG into [0,1] doubles; palette/alpha are expanded,
// alpha is dropped, 16-bit is narrowed.
inline Image read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw FormatError("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("read_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("read_png: libpng failure reading " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int width = static_cast<int>(png_get_image_width(png, info));
    int height = static_cast<int>(png_get_image_height(png, info));
    int channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError("read_png: unsupported channel count");
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(width) * height * channels);
    std::vector<png_bytep> rows(height);
    size_t stride = static_cast<size_t>(width) * channels;
    for (int y = 0; y < height; ++y) rows[y] = bytes.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    Image img(width, height, channels);
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

}  // namespace voxlift
