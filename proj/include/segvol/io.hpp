#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

#include <csetjmp>

#include <jpeglib.h>
#include <png.h>

#include "segvol/raster.hpp"

namespace segvol {

// 16-bit grayscale raster, used for label images and loaded edge maps.
using Gray16 = Raster<uint16_t>;

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

// Reads an 8-bit PNG as RGB (gray and palette images are expanded,
// alpha is stripped, 16-bit is reduced to 8).
inline RgbImage read_png_rgb(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) { png_destroy_read_struct(&png, nullptr, nullptr); throw std::runtime_error("png info failed"); }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png read error: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    int w = static_cast<int>(png_get_image_width(png, info));
    int h = static_cast<int>(png_get_image_height(png, info));
    RgbImage img(w, h);
    std::vector<png_bytep> rows(h);
    for (int r = 0; r < h; ++r) rows[r] = img.px(r, 0);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// Reads a grayscale PNG at its native bit depth (8 or 16), scaled to 16-bit.
inline Gray16 read_png_gray16(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) { png_destroy_read_struct(&png, nullptr, nullptr); throw std::runtime_error("png info failed"); }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png read error: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    if (color & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_set_strip_alpha(png);
    png_set_expand(png);
    int depth = png_get_bit_depth(png, info);
    if (depth < 16) {
        // promote 8-bit to 16 so callers see a uniform scale
        png_read_update_info(png, info);
    } else {
        png_set_swap(png);
        png_read_update_info(png, info);
    }
    int w = static_cast<int>(png_get_image_width(png, info));
    int h = static_cast<int>(png_get_image_height(png, info));
    Gray16 out(w, h);
    if (depth == 16) {
        std::vector<png_bytep> rows(h);
        for (int r = 0; r < h; ++r)
            rows[r] = reinterpret_cast<png_bytep>(&out.at(r, 0));
        png_read_image(png, rows.data());
    } else {
        std::vector<uint8_t> row8(static_cast<size_t>(w));
        std::vector<png_bytep> rows(h);
        std::vector<uint8_t> buf(static_cast<size_t>(w) * h);
        for (int r = 0; r < h; ++r) rows[r] = &buf[static_cast<size_t>(r) * w];
        png_read_image(png, rows.data());
        for (size_t i = 0; i < buf.size(); ++i)
            out[i] = static_cast<uint16_t>(buf[i] * 257);  // 255 -> 65535
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png_rgb(const std::string& path, const RgbImage& img) {
    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write error: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < img.height; ++r)
        png_write_row(png, const_cast<png_bytep>(img.px(r, 0)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_png_gray16(const std::string& path, const Gray16& img) {
    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write error: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    for (int r = 0; r < img.height(); ++r)
        png_write_row(png, reinterpret_cast<png_bytep>(
                               const_cast<uint16_t*>(&img.at(r, 0))));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Gray16 labels_to_gray16(const LabelMap& m) {
    if (m.segment_count > 65536)
        throw std::runtime_error("label map has too many segments for 16-bit output");
    Gray16 out(m.width(), m.height());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint16_t>(m.labels[i]);
    return out;
}

inline LabelMap gray16_to_labels(const Gray16& g) {
    LabelMap m(g.width(), g.height());
    for (size_t i = 0; i < g.size(); ++i)
        m.labels[i] = static_cast<int32_t>(g[i]);
    relabel_contiguous(m);
    return m;
}

// ---------------------------------------------------------------------------
// PNM (binary PPM P6 / PGM P5)
// ---------------------------------------------------------------------------

namespace detail {

inline int pnm_token(std::FILE* f) {
    int c;
    for (;;) {
        c = std::fgetc(f);
        if (c == '#') { while (c != '\n' && c != EOF) c = std::fgetc(f); }
        else if (!std::isspace(c)) break;
    }
    int v = 0;
    while (std::isdigit(c)) { v = v * 10 + (c - '0'); c = std::fgetc(f); }
    return v;
}

}  // namespace detail

inline RgbImage read_ppm(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    char magic[3] = {};
    if (std::fread(magic, 1, 2, f.get()) != 2 || std::strncmp(magic, "P6", 2) != 0)
        throw std::runtime_error("not a binary PPM (P6): " + path);
    int w = detail::pnm_token(f.get());
    int h = detail::pnm_token(f.get());
    int maxv = detail::pnm_token(f.get());
    if (w < 1 || h < 1 || maxv != 255)
        throw std::runtime_error("unsupported PPM header: " + path);
    RgbImage img(w, h);
    if (std::fread(img.data.data(), 1, img.data.size(), f.get()) != img.data.size())
        throw std::runtime_error("truncated PPM: " + path);
    return img;
}

inline Gray16 read_pgm(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    char magic[3] = {};
    if (std::fread(magic, 1, 2, f.get()) != 2 || std::strncmp(magic, "P5", 2) != 0)
        throw std::runtime_error("not a binary PGM (P5): " + path);
    int w = detail::pnm_token(f.get());
    int h = detail::pnm_token(f.get());
    int maxv = detail::pnm_token(f.get());
    if (w < 1 || h < 1 || maxv < 1 || maxv > 65535)
        throw std::runtime_error("unsupported PGM header: " + path);
    Gray16 out(w, h);
    size_t n = out.size();
    if (maxv < 256) {
        std::vector<uint8_t> buf(n);
        if (std::fread(buf.data(), 1, n, f.get()) != n)
            throw std::runtime_error("truncated PGM: " + path);
        for (size_t i = 0; i < n; ++i)
            out[i] = static_cast<uint16_t>(buf[i] * 65535 / maxv);
    } else {
        std::vector<uint8_t> buf(n * 2);
        if (std::fread(buf.data(), 1, n * 2, f.get()) != n * 2)
            throw std::runtime_error("truncated PGM: " + path);
        for (size_t i = 0; i < n; ++i) {
            uint32_t v = (static_cast<uint32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];
            out[i] = static_cast<uint16_t>(v * 65535u / maxv);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JPEG (read-only; BSDS images ship as JPEG)
// ---------------------------------------------------------------------------

namespace detail {

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

}  // namespace detail

inline RgbImage read_jpeg(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    jpeg_decompress_struct cinfo;
    detail::JpegError err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = detail::jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("jpeg read error: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    RgbImage img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.px(static_cast<int>(cinfo.output_scanline), 0);
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

// Dispatch on extension. Raster images come in as PNG, PPM, or JPEG.
inline RgbImage read_image(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == "ppm") return read_ppm(path);
    if (ext == "jpg" || ext == "jpeg") return read_jpeg(path);
    return read_png_rgb(path);
}

inline Gray16 read_gray(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == "pgm") return read_pgm(path);
    return read_png_gray16(path);
}

}  // namespace segvol
