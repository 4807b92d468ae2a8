#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"

namespace patchsim {

// Row-major grayscale raster. Intensity images hold [0,1]; disparity rasters
// loaded from PFM hold raw pixel offsets.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0f) {}

    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

// Reads one whitespace-delimited header token, skipping '#' comments.
// Reports the byte offset of the failure when the header is malformed.
inline std::string next_header_token(std::istream& in, const std::string& path) {
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF)
        throw DataError("malformed header in " + path + " at byte offset " +
                        std::to_string(static_cast<long>(in.tellg())));
    while (c != EOF && !std::isspace(c)) {
        token.push_back(static_cast<char>(c));
        c = in.get();
    }
    return token;
}

inline long parse_header_int(const std::string& token, std::istream& in, const std::string& path) {
    for (char c : token)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw DataError("malformed header in " + path + " at byte offset " +
                            std::to_string(static_cast<long>(in.tellg())) + ": expected integer, got '" +
                            token + "'");
    return std::stol(token);
}

}  // namespace detail

// P5 (binary) and P2 (ASCII) portable graymaps; 16-bit binary samples are
// big-endian per the format. Values are scaled by maxval into [0,1].
inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    const std::string magic = detail::next_header_token(in, path);
    if (magic != "P5" && magic != "P2")
        throw DataError("malformed header in " + path + " at byte offset 0: expected P5 or P2, got '" +
                        magic + "'");
    const long w = detail::parse_header_int(detail::next_header_token(in, path), in, path);
    const long h = detail::parse_header_int(detail::next_header_token(in, path), in, path);
    const long maxval = detail::parse_header_int(detail::next_header_token(in, path), in, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw DataError("malformed header in " + path + ": implausible dimensions or maxval");

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    const std::size_t n = img.pixels.size();
    const float scale = 1.0f / static_cast<float>(maxval);
    if (magic == "P2") {
        for (std::size_t k = 0; k < n; ++k) {
            long v;
            if (!(in >> v) || v < 0 || v > maxval)
                throw DataError("truncated or out-of-range sample in " + path);
            img.pixels[k] = static_cast<float>(v) * scale;
        }
        return img;
    }
    // P5: exactly one whitespace byte after maxval, already consumed by the
    // token reader.
    if (maxval < 256) {
        std::vector<unsigned char> buf(n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
            throw DataError("truncated pixel data in " + path);
        for (std::size_t k = 0; k < n; ++k) img.pixels[k] = static_cast<float>(buf[k]) * scale;
    } else {
        std::vector<unsigned char> buf(n * 2);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2)))
            throw DataError("truncated pixel data in " + path);
        for (std::size_t k = 0; k < n; ++k) {
            const unsigned v = (static_cast<unsigned>(buf[2 * k]) << 8) | buf[2 * k + 1];
            if (v > static_cast<unsigned>(maxval))
                throw DataError("out-of-range sample in " + path);
            img.pixels[k] = static_cast<float>(v) * scale;
        }
    }
    return img;
}

// Binary P5 writer; maxval 255 or 65535 selects 8- vs 16-bit samples.
// Values are clamped to [0,1] and rounded onto the sample grid.
inline void write_pgm(const GrayImage& img, const std::string& path, int maxval = 255) {
    if (maxval != 255 && maxval != 65535) throw ConfigError("write_pgm: maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open image for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    for (float p : img.pixels) {
        float v = p;
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        const unsigned q = static_cast<unsigned>(std::lround(v * static_cast<float>(maxval)));
        if (maxval == 255) {
            const unsigned char b = static_cast<unsigned char>(q);
            out.write(reinterpret_cast<const char*>(&b), 1);
        } else {
            const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                        static_cast<unsigned char>(q & 0xff)};
            out.write(reinterpret_cast<const char*>(b), 2);
        }
    }
    if (!out) throw DataError("failed writing image: " + path);
}

// Raw 8-bit P5 from explicit bytes (similarity dumps).
inline void write_pgm_bytes(const std::vector<std::uint8_t>& bytes, int width, int height,
                            const std::string& path) {
    if (static_cast<std::size_t>(width) * height != bytes.size())
        throw ShapeError("write_pgm_bytes: byte count does not match dimensions");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open image for writing: " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing image: " + path);
}

// Grayscale PFM ("Pf"). The scale line's sign encodes endianness (negative =
// little-endian); rows are stored bottom-up. Values are raw floats.
inline GrayImage read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    const std::string magic = detail::next_header_token(in, path);
    if (magic == "PF") throw DataError("color PFM not supported: " + path);
    if (magic != "Pf")
        throw DataError("malformed header in " + path + " at byte offset 0: expected Pf, got '" +
                        magic + "'");
    const long w = detail::parse_header_int(detail::next_header_token(in, path), in, path);
    const long h = detail::parse_header_int(detail::next_header_token(in, path), in, path);
    const std::string scale_tok = detail::next_header_token(in, path);
    double scale;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw DataError("malformed header in " + path + " at byte offset " +
                        std::to_string(static_cast<long>(in.tellg())) + ": bad scale '" + scale_tok +
                        "'");
    }
    if (w <= 0 || h <= 0 || scale == 0.0)
        throw DataError("malformed header in " + path + ": implausible dimensions or scale");
    const bool little_endian = scale < 0.0;

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 4);
    for (long y = h - 1; y >= 0; --y) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
            throw DataError("truncated pixel data in " + path);
        for (long x = 0; x < w; ++x) {
            unsigned char b[4];
            if (little_endian)
                std::memcpy(b, &row[static_cast<std::size_t>(x) * 4], 4);
            else {
                b[0] = row[x * 4 + 3];
                b[1] = row[x * 4 + 2];
                b[2] = row[x * 4 + 1];
                b[3] = row[x * 4 + 0];
            }
            float v;
            std::memcpy(&v, b, 4);
            img.at(static_cast<int>(x), static_cast<int>(y)) = v;
        }
    }
    return img;
}

inline void write_pfm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open image for writing: " + path);
    out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(&img.pixels[static_cast<std::size_t>(y) * img.width]),
                  static_cast<std::streamsize>(img.width) * 4);
    if (!out) throw DataError("failed writing image: " + path);
}

}  // namespace patchsim
