#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "agaze/image.hpp"
#include "agaze/scalar_map.hpp"
#include "agaze/types.hpp"

// PNG and PGM codecs.
//   stimulus images : 8-bit RGB PNG
//   maps / depth    : 16-bit grayscale PNG (value = round(65535 * v)) or PGM
//   region masks    : 8-bit PGM, 0 = unlabeled, 1 = foreground, 2 = background

namespace agaze {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

}  // namespace detail

inline ImageRgb8 read_png_rgb8(const std::filesystem::path& path) {
    auto file = detail::open_file(path, "rb");
    detail::PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode PNG '" + path.string() + "'");

    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);

    // Normalize everything to 8-bit RGB.
    png_set_strip_16(r.png);
    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 3)
        throw IoError("unexpected channel count in '" + path.string() + "'");

    ImageRgb8 img(w, h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

inline void write_png_rgb8(const std::filesystem::path& path, const ImageRgb8& img) {
    auto file = detail::open_file(path, "wb");
    detail::PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("failed to encode PNG '" + path.string() + "'");

    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

// Reads a 16-bit (or 8-bit) grayscale PNG into raw integer sample values.
inline std::vector<std::uint16_t> read_png_gray16(const std::filesystem::path& path, int& width,
                                                  int& height) {
    auto file = detail::open_file(path, "rb");
    detail::PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode PNG '" + path.string() + "'");

    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);

    const int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw IoError("'" + path.string() + "' is not grayscale");
    int bit_depth = png_get_bit_depth(r.png, r.info);
    if (bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(r.png);
        bit_depth = 8;
    }
    png_read_update_info(r.png, r.info);

    width = static_cast<int>(png_get_image_width(r.png, r.info));
    height = static_cast<int>(png_get_image_height(r.png, r.info));
    const std::size_t n = static_cast<std::size_t>(width) * height;

    std::vector<std::uint16_t> out(n);
    if (bit_depth == 16) {
        std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(width) * 2);
        for (int y = 0; y < height; ++y) {
            png_read_row(r.png, rowbuf.data(), nullptr);
            for (int x = 0; x < width; ++x) {
                // network byte order
                out[static_cast<std::size_t>(y) * width + x] =
                    static_cast<std::uint16_t>((rowbuf[2 * x] << 8) | rowbuf[2 * x + 1]);
            }
        }
    } else {
        std::vector<std::uint8_t> rowbuf(width);
        for (int y = 0; y < height; ++y) {
            png_read_row(r.png, rowbuf.data(), nullptr);
            for (int x = 0; x < width; ++x)
                out[static_cast<std::size_t>(y) * width + x] = rowbuf[x];
        }
    }
    png_read_end(r.png, nullptr);
    return out;
}

inline void write_png_gray16(const std::filesystem::path& path, int width, int height,
                             const std::vector<std::uint16_t>& samples) {
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw ArgumentError("write_png_gray16: sample count mismatch");
    auto file = detail::open_file(path, "wb");
    detail::PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("failed to encode PNG '" + path.string() + "'");

    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<std::uint8_t> rowbuf(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
            rowbuf[2 * x] = static_cast<std::uint8_t>(v >> 8);
            rowbuf[2 * x + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png_write_row(w.png, rowbuf.data());
    }
    png_write_end(w.png, nullptr);
}

// Map <-> 16-bit PNG, value = round(65535 * v).
inline void write_map_png(const std::filesystem::path& path, const ScalarMap& map) {
    std::vector<std::uint16_t> s(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        double v = map.values[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        s[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
    write_png_gray16(path, map.width, map.height, s);
}

inline ScalarMap read_map_png(const std::filesystem::path& path) {
    int w = 0, h = 0;
    const auto s = read_png_gray16(path, w, h);
    ScalarMap m(w, h, ScalarMap::Kind::Normalized);
    for (std::size_t i = 0; i < s.size(); ++i) m.values[i] = s[i] / 65535.0;
    return m;
}

// ---------------------------------------------------------------------------
// PGM (P5, and P5 16-bit big-endian for maxval > 255). Used for region masks
// and accepted for depth maps.
// ---------------------------------------------------------------------------

namespace detail {

inline int pgm_read_token(std::FILE* f) {
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (std::isspace(c)) {
            c = std::fgetc(f);
            continue;
        } else {
            break;
        }
        c = std::fgetc(f);
    }
    if (c == EOF) throw ParseError("truncated PGM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return value;
}

}  // namespace detail

inline std::vector<std::uint16_t> read_pgm(const std::filesystem::path& path, int& width,
                                           int& height, int& maxval) {
    auto file = detail::open_file(path, "rb");
    char magic[3] = {0, 0, 0};
    if (std::fread(magic, 1, 2, file.get()) != 2 || magic[0] != 'P' || magic[1] != '5')
        throw ParseError("'" + path.string() + "' is not a binary PGM (P5)");
    width = detail::pgm_read_token(file.get());
    height = detail::pgm_read_token(file.get());
    maxval = detail::pgm_read_token(file.get());
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw ParseError("bad PGM header in '" + path.string() + "'");

    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<std::uint16_t> out(n);
    if (maxval < 256) {
        std::vector<std::uint8_t> buf(n);
        if (std::fread(buf.data(), 1, n, file.get()) != n)
            throw ParseError("truncated PGM data in '" + path.string() + "'");
        for (std::size_t i = 0; i < n; ++i) out[i] = buf[i];
    } else {
        std::vector<std::uint8_t> buf(n * 2);
        if (std::fread(buf.data(), 1, n * 2, file.get()) != n * 2)
            throw ParseError("truncated PGM data in '" + path.string() + "'");
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    return out;
}

inline void write_pgm(const std::filesystem::path& path, int width, int height, int maxval,
                      const std::vector<std::uint16_t>& samples) {
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw ArgumentError("write_pgm: sample count mismatch");
    auto file = detail::open_file(path, "wb");
    std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
                         std::to_string(maxval) + "\n";
    if (std::fwrite(header.data(), 1, header.size(), file.get()) != header.size())
        throw IoError("failed to write '" + path.string() + "'");
    if (maxval < 256) {
        std::vector<std::uint8_t> buf(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            buf[i] = static_cast<std::uint8_t>(samples[i]);
        if (std::fwrite(buf.data(), 1, buf.size(), file.get()) != buf.size())
            throw IoError("failed to write '" + path.string() + "'");
    } else {
        std::vector<std::uint8_t> buf(samples.size() * 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            buf[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
            buf[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
        }
        if (std::fwrite(buf.data(), 1, buf.size(), file.get()) != buf.size())
            throw IoError("failed to write '" + path.string() + "'");
    }
}

// Region mask: 0 = unlabeled, 1 = foreground, 2 = background.
inline std::vector<std::uint8_t> read_mask_pgm(const std::filesystem::path& path, int& width,
                                               int& height) {
    int maxval = 0;
    const auto raw = read_pgm(path, width, height, maxval);
    std::vector<std::uint8_t> mask(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] > 2)
            throw ValidationError("mask '" + path.string() + "' has label " +
                                  std::to_string(raw[i]) + " (expected 0, 1, or 2)");
        mask[i] = static_cast<std::uint8_t>(raw[i]);
    }
    return mask;
}

inline void write_mask_pgm(const std::filesystem::path& path, int width, int height,
                           const std::vector<std::uint8_t>& mask) {
    std::vector<std::uint16_t> raw(mask.begin(), mask.end());
    write_pgm(path, width, height, 255, raw);
}

// Depth files store raw distance: 0 = nearest, maxval = farthest. The loaded
// map is normalized to [0,1] with the same polarity, so near-ness = 1 - v.
inline ScalarMap read_depth_file(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    int w = 0, h = 0;
    if (ext == ".png") {
        const auto s = read_png_gray16(path, w, h);
        ScalarMap m(w, h, ScalarMap::Kind::Normalized);
        for (std::size_t i = 0; i < s.size(); ++i) m.values[i] = s[i] / 65535.0;
        return m;
    }
    if (ext == ".pgm") {
        int maxval = 0;
        const auto s = read_pgm(path, w, h, maxval);
        ScalarMap m(w, h, ScalarMap::Kind::Normalized);
        for (std::size_t i = 0; i < s.size(); ++i)
            m.values[i] = static_cast<double>(s[i]) / maxval;
        return m;
    }
    throw ArgumentError("unsupported depth file extension '" + ext + "' (want .png or .pgm)");
}

}  // namespace agaze
