#pragma once

// Raster I/O: PNG through libpng, PGM/PPM (binary and ASCII) natively.
// Label maps are 8-bit single-channel; palette PNGs are read as raw indices.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

#include "sclp/common.hpp"

namespace sclp::io {

struct RawRaster {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1, 3, or 4
    bool palette = false;
    std::vector<std::uint8_t> data;
};

namespace detail {

inline std::string lower_ext(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = msg;
    png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

// expand_palette=false keeps palette indices (label maps).
inline RawRaster read_png(const std::string& path, bool expand_palette) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw LoadError("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw LoadError("not a PNG file: " + path);

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw LoadError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    RawRaster out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("PNG decode error in " + path + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        if (expand_palette) {
            png_set_palette_to_rgb(png);
        } else {
            out.palette = true;
            if (depth < 8) png_set_packing(png);
        }
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.data.resize(stride * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    // gray+alpha arrives as 2 channels
    if (out.channels == 2) out.channels = 4;  // treated as "has alpha" and rejected upstream for images
    return out;
}

inline void write_png(const std::string& path, int width, int height, int channels, const std::uint8_t* data) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw LoadError("cannot write " + path);
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw LoadError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_const_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("PNG encode error in " + path + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // no timestamps or text chunks: output is a pure function of the pixels
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) rows[y] = data + static_cast<std::size_t>(y) * width * channels;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline RawRaster read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path);
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    const std::string magic = token();
    int channels = 0;
    bool ascii = false;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else if (magic == "P2") channels = 1, ascii = true;
    else if (magic == "P3") channels = 3, ascii = true;
    else throw LoadError("unsupported PNM magic in " + path);
    RawRaster r;
    try {
        r.width = std::stoi(token());
        r.height = std::stoi(token());
        const int maxval = std::stoi(token());
        if (maxval <= 0 || maxval > 255) throw LoadError("only 8-bit PNM supported: " + path);
    } catch (const std::logic_error&) {
        throw LoadError("malformed PNM header in " + path);
    }
    r.channels = channels;
    r.data.resize(static_cast<std::size_t>(r.width) * r.height * channels);
    if (ascii) {
        for (auto& v : r.data) {
            const std::string t = token();
            if (t.empty()) throw LoadError("truncated PNM: " + path);
            v = static_cast<std::uint8_t>(std::stoi(t));
        }
    } else {
        in.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size()));
        if (in.gcount() != static_cast<std::streamsize>(r.data.size())) throw LoadError("truncated PNM: " + path);
    }
    return r;
}

inline void write_pnm(const std::string& path, int width, int height, int channels, const std::uint8_t* data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write " + path);
    out << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(width) * height * channels);
    if (!out) throw LoadError("write failed: " + path);
}

inline RawRaster read_raster(const std::string& path, bool expand_palette) {
    if (!std::filesystem::exists(path)) throw LoadError("file not found: " + path);
    const std::string ext = lower_ext(path);
    if (ext == ".png") return read_png(path, expand_palette);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
    throw LoadError("unsupported raster format: " + path);
}

inline void write_raster(const std::string& path, int width, int height, int channels, const std::uint8_t* data) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return write_png(path, width, height, channels, data);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return write_pnm(path, width, height, channels, data);
    throw LoadError("unsupported raster format: " + path);
}

} // namespace detail

/// Loads an RGB image. Grayscale is replicated to three channels; rasters
/// with an alpha channel are rejected.
inline Image load_image(const std::string& path) {
    const RawRaster r = detail::read_raster(path, true);
    if (r.channels > 3) throw LoadError("image has more than 3 channels: " + path);
    Image img(r.width, r.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t v = r.channels == 1 ? r.data[i] : r.data[i * 3 + c];
            img.data[i * 3 + c] = static_cast<float>(v) / 255.0f;
        }
    return img;
}

inline void save_image(const std::string& path, const Image& img) {
    std::vector<std::uint8_t> buf(img.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
    detail::write_raster(path, img.width, img.height, 3, buf.data());
}

inline LabelMap load_label_map(const std::string& path) {
    const RawRaster r = detail::read_raster(path, false);
    if (r.channels != 1) throw LoadError("label map must be single-channel: " + path);
    LabelMap lm(r.width, r.height);
    lm.labels = r.data;
    return lm;
}

inline void save_label_map(const std::string& path, const LabelMap& lm) {
    detail::write_raster(path, lm.width, lm.height, 1, lm.labels.data());
}

} // namespace sclp::io
