#include "cdae/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace cdae {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("cannot read image '" + path + "': " + why);
}

std::string lower_ext(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

int ppm_next_value(std::istream& is, const std::string& path) {
    // PNM headers allow '#' comments anywhere between tokens.
    while (true) {
        const int c = is.peek();
        if (c == '#') {
            std::string skip;
            std::getline(is, skip);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    if (!(is >> v)) fail(path, "malformed PNM header");
    return v;
}

ImageU8 read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(path, "cannot open");
    char magic[2] = {0, 0};
    is.read(magic, 2);
    const bool gray = magic[0] == 'P' && magic[1] == '5';
    if (!gray && !(magic[0] == 'P' && magic[1] == '6')) fail(path, "not a P5/P6 PNM file");
    const int w = ppm_next_value(is, path);
    const int h = ppm_next_value(is, path);
    const int maxval = ppm_next_value(is, path);
    if (w <= 0 || h <= 0 || maxval != 255) fail(path, "unsupported PNM geometry or depth");
    is.get();  // single whitespace after maxval
    const std::size_t stride = gray ? 1 : 3;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * stride);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size()) fail(path, "truncated pixel data");

    ImageU8 img{w, h, {}};
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    if (gray) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            img.rgb[i * 3] = img.rgb[i * 3 + 1] = img.rgb[i * 3 + 2] = raw[i];
        }
    } else {
        img.rgb = std::move(raw);
    }
    return img;
}

ImageU8 read_bmp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(path, "cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M') fail(path, "not a BMP file");
    auto u32 = [&](std::size_t off) {
        return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
    };
    auto s32 = [&](std::size_t off) { return static_cast<std::int32_t>(u32(off)); };
    const std::uint32_t data_off = u32(10);
    const std::int32_t w = s32(18);
    const std::int32_t h_raw = s32(22);
    const std::uint16_t bpp = static_cast<std::uint16_t>(bytes[28] | (bytes[29] << 8));
    const std::uint32_t compression = u32(30);
    if (w <= 0 || h_raw == 0) fail(path, "bad BMP dimensions");
    if (compression != 0 || (bpp != 24 && bpp != 32)) fail(path, "only uncompressed 24/32-bit BMP supported");
    const bool top_down = h_raw < 0;
    const std::int64_t h = top_down ? -h_raw : h_raw;
    const std::size_t bytes_pp = bpp / 8;
    const std::size_t row_stride = ((static_cast<std::size_t>(w) * bytes_pp + 3) / 4) * 4;
    if (bytes.size() < data_off + row_stride * static_cast<std::size_t>(h)) fail(path, "truncated pixel data");

    ImageU8 img{w, h, {}};
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::int64_t y = 0; y < h; ++y) {
        const std::int64_t src_y = top_down ? y : (h - 1 - y);
        const std::uint8_t* row = bytes.data() + data_off + row_stride * static_cast<std::size_t>(src_y);
        for (std::int64_t x = 0; x < w; ++x) {
            const std::uint8_t* px = row + static_cast<std::size_t>(x) * bytes_pp;
            std::uint8_t* dst = img.rgb.data() + (y * w + x) * 3;
            dst[0] = px[2];  // BMP stores BGR
            dst[1] = px[1];
            dst[2] = px[0];
        }
    }
    return img;
}

ImageU8 read_png(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) fail(path, "cannot open");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng init failed");
    }
    std::vector<png_bytep> row_ptrs;
    ImageU8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng decode error");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    img.width = static_cast<std::int64_t>(png_get_image_width(png, info));
    img.height = static_cast<std::int64_t>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unexpected channel count after PNG normalization");
    }
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    row_ptrs.resize(static_cast<std::size_t>(img.height));
    for (std::int64_t y = 0; y < img.height; ++y) {
        row_ptrs[static_cast<std::size_t>(y)] = img.rgb.data() + y * img.width * 3;
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return read_png(path);
    if (ext == "ppm" || ext == "pgm" || ext == "pnm") return read_ppm(path);
    if (ext == "bmp") return read_bmp(path);
    fail(path, "unsupported extension '" + ext + "'");
}

void write_ppm(const std::string& path, const ImageU8& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write image '" + path + "'");
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.rgb.data()),
             static_cast<std::streamsize>(img.rgb.size()));
    if (!os) throw std::runtime_error("short write to '" + path + "'");
}

void write_png(const std::string& path, const ImageU8& img) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot write image '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng init failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng encode error for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::int64_t y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + y * img.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageU8 resize_bilinear(const ImageU8& img, std::int64_t width, std::int64_t height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize target must be positive");
    if (width == img.width && height == img.height) return img;
    ImageU8 out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
    const double sx = static_cast<double>(img.width) / static_cast<double>(width);
    const double sy = static_cast<double>(img.height) / static_cast<double>(height);
    for (std::int64_t y = 0; y < height; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        const std::int64_t y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fy)), 0, img.height - 1);
        const std::int64_t y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
        for (std::int64_t x = 0; x < width; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const std::int64_t x0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fx)), 0, img.width - 1);
            const std::int64_t x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double v00 = img.rgb[(y0 * img.width + x0) * 3 + c];
                const double v01 = img.rgb[(y0 * img.width + x1) * 3 + c];
                const double v10 = img.rgb[(y1 * img.width + x0) * 3 + c];
                const double v11 = img.rgb[(y1 * img.width + x1) * 3 + c];
                const double v = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                 wy * ((1.0 - wx) * v10 + wx * v11);
                out.rgb[(y * width + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

}  // namespace cdae
