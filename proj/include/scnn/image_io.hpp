#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scnn {

// 8-bit interleaved pixels, 1 (gray) or 3 (RGB) channels.
struct Image8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

// Decodes a JPEG or PNG file, detected by signature. Alpha is dropped and
// 16-bit PNGs are reduced to 8 bits. Throws FormatError / IoError.
Image8 decode_image(const std::filesystem::path& path);

// Writes a 1- or 3-channel PNG. Output bytes depend only on the pixels.
void write_png(const std::filesystem::path& path, const Image8& image);

// Corner-aligned bilinear resampling of a single-channel h x w plane:
// output corners land exactly on input corners.
std::vector<float> resize_bilinear_plane(std::span<const float> src, std::size_t h, std::size_t w, std::size_t out_h,
                                         std::size_t out_w);

}  // namespace scnn
