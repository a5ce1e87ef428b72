#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scnn/image_io.hpp"
#include "scnn/model.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

struct Heatmap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;  // row-major

    float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
    float max() const;
};

struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // h * w * 3

    RgbImage() = default;
    RgbImage(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w * 3, fill) {}

    std::array<std::uint8_t, 3> at(std::size_t y, std::size_t x) const {
        const std::size_t o = (y * width + x) * 3;
        return {pixels[o], pixels[o + 1], pixels[o + 2]};
    }
    void set(std::size_t y, std::size_t x, std::array<std::uint8_t, 3> rgb) {
        const std::size_t o = (y * width + x) * 3;
        pixels[o] = rgb[0];
        pixels[o + 1] = rgb[1];
        pixels[o + 2] = rgb[2];
    }
    Image8 to_image8() const { return Image8{height, width, 3, pixels}; }
};

struct GradcamResult {
    Heatmap heatmap;
    Tensor logits;             // (k,)
    std::size_t predicted = 0; // argmax of logits
    std::size_t target = 0;    // class whose score was differentiated
};

// Grad-CAM on a single (h, w, c) image:
//  1. forward, capturing the activations A of the named conv layer;
//  2. backpropagate the target class score (argmax unless overridden) to A;
//  3. weight each channel of A by the spatial mean of its gradient and sum;
//  4. clamp negatives to 0 and divide by the maximum (all zeros when max <= 0).
GradcamResult gradcam(const Model& m, const Tensor& image, std::string_view last_conv = kLastConvName,
                      std::optional<std::size_t> target_class = std::nullopt);
Heatmap gradcam_heatmap(const Model& m, const Tensor& image, std::string_view last_conv = kLastConvName);

// Piecewise-linear jet colormap; value is clamped to [0, 1], channels rounded half-up.
std::array<std::uint8_t, 3> jet(double value);

Heatmap resize_bilinear(const Heatmap& hm, std::size_t out_h, std::size_t out_w);

// Heatmap rendered as gray levels round(255 * v).
RgbImage grey_heatmap_image(const Heatmap& hm);
// Heatmap quantized to 0..255 and colorized with jet.
RgbImage jet_heatmap_image(const Heatmap& hm);
// A [0, 1] (h, w, 1) image replicated to RGB at 0..255.
RgbImage gray_to_rgb(const Tensor& image);

// round(jet(q / 255) * alpha + 255 * image), clamped, with q the heatmap
// quantized to 0..255. The heatmap must already match the image size.
RgbImage superimpose(const Heatmap& hm, const Tensor& image, double alpha);

struct ExplainOptions {
    // Explicit case images; when empty, m cases are sampled from data_dir.
    std::vector<std::filesystem::path> cases;
    // Either a split root (its test/ subset is used) or a folder of class directories.
    std::filesystem::path data_dir;
    std::size_t m = 4;
    std::uint64_t seed = 888;
    double alpha = 0.4;
    std::optional<std::size_t> target_class;
    std::string last_conv = std::string(kLastConvName);
};

struct CaseExplanation {
    std::filesystem::path path;
    std::string truth;  // class folder name, "?" when unknown
    std::size_t predicted = 0;
    std::string predicted_name;
    GradcamResult cam;
    RgbImage original;
    RgbImage grey;
    RgbImage jet;
    RgbImage superimposed;
};

struct CaseGrid {
    RgbImage grid;  // one row per case: original | grey heatmap | jet heatmap | superimposed
    std::vector<CaseExplanation> cases;
};

// The cases that render_cases would use, in row order.
std::vector<std::pair<std::filesystem::path, std::string>> select_cases(const ExplainOptions& options);
CaseGrid render_cases(const Model& m, const ExplainOptions& options);
// Writes <stem>_gradcam.png per case and cases_grid.png; returns the written paths.
std::vector<std::filesystem::path> write_explanations(const CaseGrid& grid, const std::filesystem::path& out_dir);

// Draws caption text with the embedded 5x7 font; clipped at the image edge.
void draw_text(RgbImage& img, std::size_t x, std::size_t y, std::string_view text, std::array<std::uint8_t, 3> color);

}  // namespace scnn
