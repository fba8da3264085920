#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cdae {

// Interleaved 8-bit RGB raster (gray widened to RGB on load, alpha dropped).
struct ImageU8 {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> rgb;  // height * width * 3
};

// Dispatches on extension: .png, .ppm (P6/P5), .bmp (24/32-bit
// uncompressed). Throws std::runtime_error with the path on failure.
ImageU8 read_image(const std::string& path);

void write_ppm(const std::string& path, const ImageU8& img);
void write_png(const std::string& path, const ImageU8& img);

ImageU8 resize_bilinear(const ImageU8& img, std::int64_t width, std::int64_t height);

}  // namespace cdae
