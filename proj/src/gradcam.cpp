#include "scnn/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "font5x7.hpp"
#include "scnn/data.hpp"
#include "scnn/errors.hpp"
#include "scnn/random.hpp"

namespace fs = std::filesystem;

namespace scnn {

float Heatmap::max() const {
    if (values.empty()) return 0.0f;
    return *std::max_element(values.begin(), values.end());
}

GradcamResult gradcam(const Model& m, const Tensor& image, std::string_view last_conv,
                      std::optional<std::size_t> target_class) {
    const std::size_t layer = m.index_of(last_conv);
    if (m.layer(layer).kind != LayerKind::Conv2D)
        throw std::invalid_argument("layer \"" + std::string(last_conv) + "\" is not a convolution layer");

    const Trace trace = forward_trace(m, image);
    GradcamResult r;
    r.logits = trace.logits();
    r.predicted = argmax(r.logits.data());
    r.target = target_class.value_or(r.predicted);
    if (r.target >= m.num_classes()) throw std::invalid_argument("target class out of range");

    Tensor dscore(trace.logits().shape());
    dscore[r.target] = 1.0f;
    const Tensor& acts = trace.outputs[layer];  // (H, W, C)
    const Tensor grads = backward(m, trace, dscore, nullptr, layer);
    const Tensor weights = reduce(grads, {0, 1}, ReduceMode::Mean);  // (C,)

    const std::size_t h = acts.shape()[0], w = acts.shape()[1], c = acts.shape()[2];
    r.heatmap.height = h;
    r.heatmap.width = w;
    r.heatmap.values.assign(h * w, 0.0f);
    for (std::size_t p = 0; p < h * w; ++p) {
        double sum = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) sum += static_cast<double>(weights[ch]) * acts[p * c + ch];
        r.heatmap.values[p] = static_cast<float>(std::max(sum, 0.0));
    }
    const float mx = r.heatmap.max();
    if (mx > 0.0f)
        for (float& v : r.heatmap.values) v /= mx;
    else
        std::fill(r.heatmap.values.begin(), r.heatmap.values.end(), 0.0f);
    return r;
}

Heatmap gradcam_heatmap(const Model& m, const Tensor& image, std::string_view last_conv) {
    return gradcam(m, image, last_conv).heatmap;
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

std::uint8_t quantize(float v) { return to_byte(255.0 * clamp01(v)); }

}  // namespace

std::array<std::uint8_t, 3> jet(double value) {
    const double x = clamp01(value);
    const double r = clamp01(std::min(4.0 * x - 1.5, -4.0 * x + 4.5));
    const double g = clamp01(std::min(4.0 * x - 0.5, -4.0 * x + 3.5));
    const double b = clamp01(std::min(4.0 * x + 0.5, -4.0 * x + 2.5));
    return {to_byte(255.0 * r), to_byte(255.0 * g), to_byte(255.0 * b)};
}

Heatmap resize_bilinear(const Heatmap& hm, std::size_t out_h, std::size_t out_w) {
    return Heatmap{out_h, out_w, resize_bilinear_plane(hm.values, hm.height, hm.width, out_h, out_w)};
}

RgbImage grey_heatmap_image(const Heatmap& hm) {
    RgbImage img(hm.height, hm.width);
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        const std::uint8_t q = quantize(hm.values[i]);
        img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = q;
    }
    return img;
}

RgbImage jet_heatmap_image(const Heatmap& hm) {
    RgbImage img(hm.height, hm.width);
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        const auto c = jet(quantize(hm.values[i]) / 255.0);
        std::copy(c.begin(), c.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    return img;
}

RgbImage gray_to_rgb(const Tensor& image) {
    if (image.shape().rank() != 3 || image.shape()[2] != 1) throw std::invalid_argument("expected an (h, w, 1) image");
    RgbImage img(image.shape()[0], image.shape()[1]);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const std::uint8_t v = to_byte(255.0 * static_cast<double>(image[i]));
        img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = v;
    }
    return img;
}

RgbImage superimpose(const Heatmap& hm, const Tensor& image, double alpha) {
    if (image.shape().rank() != 3 || image.shape()[2] != 1) throw std::invalid_argument("superimpose expects an (h, w, 1) image");
    if (hm.height != image.shape()[0] || hm.width != image.shape()[1])
        throw std::invalid_argument("superimpose: heatmap " + std::to_string(hm.height) + "x" + std::to_string(hm.width) +
                                    " does not match image " + image.shape().str());
    if (!(alpha >= 0.0)) throw std::invalid_argument("superimpose: alpha must be non-negative");
    RgbImage out(hm.height, hm.width);
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        const auto c = jet(quantize(hm.values[i]) / 255.0);
        const double base = 255.0 * static_cast<double>(image[i]);
        for (std::size_t ch = 0; ch < 3; ++ch) out.pixels[3 * i + ch] = to_byte(c[ch] * alpha + base);
    }
    return out;
}

void draw_text(RgbImage& img, std::size_t x, std::size_t y, std::string_view text, std::array<std::uint8_t, 3> color) {
    std::size_t pen = x;
    for (char ch : text) {
        const auto& g = font::glyph_for(ch);
        for (int row = 0; row < font::kGlyphH; ++row)
            for (int col = 0; col < font::kGlyphW; ++col) {
                if (g.rows[row][col] != '#') continue;
                const std::size_t px = pen + static_cast<std::size_t>(col), py = y + static_cast<std::size_t>(row);
                if (px < img.width && py < img.height) img.set(py, px, color);
            }
        pen += font::kAdvance;
        if (pen >= img.width) break;
    }
}

std::vector<std::pair<fs::path, std::string>> select_cases(const ExplainOptions& options) {
    std::vector<std::pair<fs::path, std::string>> out;
    if (!options.cases.empty()) {
        for (const auto& p : options.cases) {
            if (!fs::is_regular_file(p)) throw IoError("case image not found: " + p.string());
            const std::string parent = p.parent_path().filename().string();
            out.emplace_back(p, parent.empty() ? "?" : parent);
        }
        return out;
    }
    if (options.data_dir.empty()) throw std::invalid_argument("no cases given and no dataset directory to sample from");
    fs::path root = options.data_dir;
    if (fs::is_directory(root / "test")) root /= "test";
    const DatasetIndex ds = index_dataset(root);
    if (ds.empty()) throw IoError("no images to sample in " + root.string());

    // Partial Fisher-Yates: the first m positions become the sample, in draw order.
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t m = std::min(options.m, order.size());
    Rng rng(options.seed);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const Sample& s = ds.samples[order[i]];
        out.emplace_back(s.path, ds.classes[s.label]);
    }
    return out;
}

namespace {

constexpr std::size_t kPad = 4;
constexpr std::size_t kBand = 12;
constexpr std::array<std::uint8_t, 3> kInk{0, 0, 0};

constexpr std::size_t kMinPanel = 96;

// Copies src into dst at (x0, y0), each pixel repeated scale x scale times.
void blit(RgbImage& dst, const RgbImage& src, std::size_t x0, std::size_t y0, std::size_t scale) {
    for (std::size_t y = 0; y < src.height * scale; ++y)
        for (std::size_t x = 0; x < src.width * scale; ++x) dst.set(y0 + y, x0 + x, src.at(y / scale, x / scale));
}

std::string class_label(const Model& m, std::size_t idx) {
    if (idx < m.class_names.size()) return m.class_names[idx];
    return "class " + std::to_string(idx);
}

}  // namespace

CaseGrid render_cases(const Model& m, const ExplainOptions& options) {
    const auto selected = select_cases(options);
    const Shape& in = m.input_shape();
    if (in[2] != 1) throw std::invalid_argument("explanations expect a single-channel model input");
    const std::size_t h = in[0], w = in[1];

    CaseGrid out;
    for (const auto& [path, truth] : selected) {
        CaseExplanation c;
        c.path = path;
        c.truth = truth;
        const Tensor image = load_grayscale_image(path, h, w);
        c.cam = gradcam(m, image, options.last_conv, options.target_class);
        c.predicted = c.cam.predicted;
        c.predicted_name = class_label(m, c.predicted);
        const Heatmap full = resize_bilinear(c.cam.heatmap, h, w);
        c.original = gray_to_rgb(image);
        c.grey = grey_heatmap_image(full);
        c.jet = jet_heatmap_image(full);
        c.superimposed = superimpose(full, image, options.alpha);
        out.cases.push_back(std::move(c));
    }

    // Small inputs are magnified so captions and headers fit over the panels.
    const std::size_t scale = w >= kMinPanel ? 1 : (kMinPanel + w - 1) / w;
    const std::size_t pw = w * scale, ph = h * scale;
    const std::size_t rows = out.cases.size();
    const std::size_t grid_w = 4 * pw + 5 * kPad;
    const std::size_t grid_h = kPad + kBand + rows * (kBand + ph + kPad);
    out.grid = RgbImage(grid_h, grid_w, 255);

    static const char* kHeaders[4] = {"original", "grey heatmap", "jet heatmap", "prediction"};
    for (std::size_t col = 0; col < 4; ++col) draw_text(out.grid, kPad + col * (pw + kPad), kPad + 2, kHeaders[col], kInk);

    std::size_t y = kPad + kBand;
    for (const auto& c : out.cases) {
        const std::string caption =
            c.path.filename().string() + "  pred: " + c.predicted_name + "  true: " + c.truth;
        draw_text(out.grid, kPad, y + 2, caption, kInk);
        y += kBand;
        const RgbImage* panels[4] = {&c.original, &c.grey, &c.jet, &c.superimposed};
        for (std::size_t col = 0; col < 4; ++col) blit(out.grid, *panels[col], kPad + col * (pw + kPad), y, scale);
        y += ph + kPad;
    }
    return out;
}

std::vector<fs::path> write_explanations(const CaseGrid& grid, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    std::map<std::string, int> seen;
    for (const auto& c : grid.cases) {
        std::string stem = c.path.stem().string();
        if (const int n = seen[stem]++; n > 0) stem += "_" + std::to_string(n);
        const fs::path p = out_dir / (stem + "_gradcam.png");
        write_png(p, c.superimposed.to_image8());
        written.push_back(p);
    }
    const fs::path grid_path = out_dir / "cases_grid.png";
    write_png(grid_path, grid.grid.to_image8());
    written.push_back(grid_path);
    return written;
}

}  // namespace scnn
