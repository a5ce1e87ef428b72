#pragma once

// Test helpers: scratch directories, synthetic image trees and double
// precision reference ops used as independent oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "scnn/image_io.hpp"
#include "scnn/tensor.hpp"

namespace scnn_test {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "scnn") {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Empty placeholder files: enough for splitting, which never decodes.
inline void make_placeholder_tree(const fs::path& root, const std::vector<std::pair<std::string, std::size_t>>& classes) {
    for (const auto& [name, n] : classes) {
        fs::create_directories(root / name);
        for (std::size_t i = 0; i < n; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "img_%05zu.jpg", i);
            std::ofstream(root / name / buf) << name << i;
        }
    }
}

// Two classes of size x size gray noise images with a bright square in the
// top-left ("left") or bottom-right ("right") quadrant.
inline void make_two_class_tree(const fs::path& root, std::size_t per_class, std::size_t size, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::uniform_int_distribution<int> noise(0, 60);
    const char* names[2] = {"left", "right"};
    for (int c = 0; c < 2; ++c) {
        fs::create_directories(root / names[c]);
        for (std::size_t i = 0; i < per_class; ++i) {
            scnn::Image8 img{size, size, 1, std::vector<std::uint8_t>(size * size)};
            for (auto& p : img.pixels) p = static_cast<std::uint8_t>(noise(gen));
            const std::size_t q = size / 2, off = c == 0 ? size / 8 : size / 2 + size / 8 - size / 16;
            for (std::size_t y = off; y < off + q / 2 + 1 && y < size; ++y)
                for (std::size_t x = off; x < off + q / 2 + 1 && x < size; ++x) img.pixels[y * size + x] = 230;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s_%03zu.png", names[c], i);
            scnn::write_png(root / names[c] / buf, img);
        }
    }
}

// Dense double arrays in the same HWC / (in, out) layouts as the library.
using Vec = std::vector<double>;

inline Vec to_vec(const scnn::Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

inline Vec ref_conv(const Vec& x, std::size_t h, std::size_t w, std::size_t cin, const Vec& k, std::size_t kh,
                    std::size_t kw, std::size_t cout, const Vec& b, std::size_t stride, std::size_t pad, std::size_t& oh,
                    std::size_t& ow) {
    oh = (h + 2 * pad - kh) / stride + 1;
    ow = (w + 2 * pad - kw) / stride + 1;
    Vec y(oh * ow * cout, 0.0);
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t co = 0; co < cout; ++co) {
                double s = b[co];
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j) {
                        const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
                        const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
                        if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                        for (std::size_t ci = 0; ci < cin; ++ci)
                            s += x[(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin + ci] *
                                 k[((i * kw + j) * cin + ci) * cout + co];
                    }
                y[(oy * ow + ox) * cout + co] = s;
            }
    return y;
}

inline Vec ref_maxpool(const Vec& x, std::size_t h, std::size_t w, std::size_t c, std::size_t p, std::size_t s,
                       std::size_t& oh, std::size_t& ow) {
    oh = (h - p) / s + 1;
    ow = (w - p) / s + 1;
    Vec y(oh * ow * c);
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t ch = 0; ch < c; ++ch) {
                double m = -INFINITY;
                for (std::size_t i = 0; i < p; ++i)
                    for (std::size_t j = 0; j < p; ++j) m = std::max(m, x[((oy * s + i) * w + ox * s + j) * c + ch]);
                y[(oy * ow + ox) * c + ch] = m;
            }
    return y;
}

inline Vec ref_dense(const Vec& x, const Vec& W, const Vec& b, std::size_t n_in, std::size_t n_out) {
    Vec y(b.begin(), b.end());
    for (std::size_t i = 0; i < n_in; ++i)
        for (std::size_t o = 0; o < n_out; ++o) y[o] += x[i] * W[i * n_out + o];
    return y;
}

inline Vec ref_relu(const Vec& x) {
    Vec y(x);
    for (double& v : y) v = v > 0.0 ? v : 0.0;
    return y;
}

// Mean softmax cross-entropy of rows of logits against integer labels.
inline double ref_softmax_ce(const Vec& logits, std::size_t k, const std::vector<std::size_t>& labels) {
    const std::size_t b = labels.size();
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        const double* z = &logits[r * k];
        const double m = *std::max_element(z, z + k);
        double se = 0.0;
        for (std::size_t j = 0; j < k; ++j) se += std::exp(z[j] - m);
        total += -(z[labels[r]] - m - std::log(se));
    }
    return total / static_cast<double>(b);
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Central difference of f at x along every coordinate.
template <typename F>
Vec central_fd(F&& f, Vec x, double step) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double up = f(x);
        x[i] = orig - step;
        const double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

// Largest elementwise |a - n| / max(|a|, |n|, floor). The floor keeps
// near-zero entries from turning rounding noise into large ratios.
inline double max_rel_error(const Vec& analytic, const Vec& numeric, double floor = 1e-2) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double d = std::fabs(analytic[i] - numeric[i]);
        const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), floor});
        worst = std::max(worst, d / scale);
    }
    return worst;
}

}  // namespace scnn_test
