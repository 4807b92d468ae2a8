#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/image.hpp"

namespace patchsim {

// Raw 16-bit grayscale samples, for disparity rasters stored as value*256.
// No color transforms: sample values round-trip exactly.
inline std::vector<std::uint16_t> read_png_u16(const std::string& path, int& width, int& height) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw DataError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw DataError("libpng initialization failed for " + path);
    }
    std::vector<unsigned char> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("failed decoding PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("expected 16-bit grayscale PNG: " + path);
    }
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = buf.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    std::vector<std::uint16_t> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const unsigned char* r = buf.data() + rowbytes * static_cast<std::size_t>(y);
        for (int x = 0; x < width; ++x)
            out[static_cast<std::size_t>(y) * width + x] =
                static_cast<std::uint16_t>((static_cast<unsigned>(r[2 * x]) << 8) | r[2 * x + 1]);
    }
    return out;
}

inline void write_png_u16(const std::vector<std::uint16_t>& samples, int width, int height,
                          const std::string& path) {
    if (static_cast<std::size_t>(width) * height != samples.size())
        throw ShapeError("write_png_u16: sample count does not match dimensions");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw DataError("cannot open image for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw DataError("libpng initialization failed for " + path);
    }
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height * 2);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw DataError("failed encoding PNG: " + path);
    }
    for (int y = 0; y < height; ++y) {
        unsigned char* r = buf.data() + static_cast<std::size_t>(y) * width * 2;
        rows[y] = r;
        for (int x = 0; x < width; ++x) {
            const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
            r[2 * x] = static_cast<unsigned char>(v >> 8);
            r[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
        }
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw DataError("failed writing image: " + path);
}

// Any PNG as a [0,1] grayscale image; color inputs are reduced with the
// ITU-R 601 luma weights.
inline GrayImage read_png_gray(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw DataError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw DataError("libpng initialization failed for " + path);
    }
    std::vector<unsigned char> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("failed decoding PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int in_color = png_get_color_type(png, info);
    const int in_depth = png_get_bit_depth(png, info);
    if (in_color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (in_color == PNG_COLOR_TYPE_GRAY && in_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
    if (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("unsupported PNG color layout in " + path);
    }
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = buf.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    GrayImage img(width, height);
    const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    for (int y = 0; y < height; ++y) {
        const unsigned char* r = buf.data() + rowbytes * static_cast<std::size_t>(y);
        for (int x = 0; x < width; ++x) {
            float samples[3];
            for (int c = 0; c < channels; ++c) {
                unsigned v;
                if (depth == 16) {
                    const std::size_t off = (static_cast<std::size_t>(x) * channels + c) * 2;
                    v = (static_cast<unsigned>(r[off]) << 8) | r[off + 1];
                } else {
                    v = r[static_cast<std::size_t>(x) * channels + c];
                }
                samples[c] = static_cast<float>(v) * scale;
            }
            img.at(x, y) = channels == 3
                               ? 0.299f * samples[0] + 0.587f * samples[1] + 0.114f * samples[2]
                               : samples[0];
        }
    }
    return img;
}

}  // namespace patchsim
