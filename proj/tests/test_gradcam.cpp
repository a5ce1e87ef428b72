#include <gtest/gtest.h>

#include "scnn/data.hpp"
#include "scnn/gradcam.hpp"
#include "scnn/training.hpp"
#include "support.hpp"

using scnn::Shape;
using scnn::Tensor;

namespace {

// 3x3x1 input -> 1x1 conv with two filters (1 and 0.5) -> flatten -> dense(2).
// With x >= 0 the conv activations are A0 = x and A1 = x / 2, and the class
// score gradient w.r.t. A at pixel p, channel c is W[2p + c][target].
scnn::Model toy_model(float w0, float w1) {
    scnn::Model m(Shape{3, 3, 1});
    m.conv2d(2, {1, 1}, true, "lastConv").flatten().dense(2, false, "output_layer");
    auto& conv = m.layer(1).conv();
    conv.kernels[0] = 1.0f;
    conv.kernels[1] = 0.5f;
    auto& d = m.layer(3).dense();
    for (std::size_t p = 0; p < 9; ++p) {
        d.weights.at({2 * p, 1}) = w0;
        d.weights.at({2 * p + 1, 1}) = w1;
    }
    d.bias[1] = 100.0f;  // class 1 is the prediction
    return m;
}

Tensor ramp() {
    Tensor x({3, 3, 1});
    for (std::size_t i = 0; i < 9; ++i) x[i] = static_cast<float>(i) / 8.0f;
    return x;
}

scnn::Model small_slim(std::uint64_t seed) {
    scnn::Model m = scnn::build_slim_cnn({20, 20, 1, {4, 6, 6}, 3, 0, 2, 8, 3});
    scnn::init_weights(m, seed);
    return m;
}

Tensor blob_image(std::size_t h, std::size_t w) {
    Tensor x({h, w, 1});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t c = 0; c < w; ++c)
            x.at({y, c, 0}) = static_cast<float>(((y * 7 + c * 13) % 17) / 17.0 + (y > h / 2 && c < w / 3 ? 0.5 : 0.0));
    return x;
}

}  // namespace

// Channel weights 0.5 and -0.25: cam = 0.5 x - 0.25 (x / 2) = 0.375 x, so the
// normalised heatmap is x / max(x) = i / 8 at pixel i.
TEST(Gradcam, ToyModelMatchesHandDerivation) {
    const auto r = scnn::gradcam(toy_model(0.5f, -0.25f), ramp());
    EXPECT_EQ(r.predicted, 1u);
    EXPECT_EQ(r.target, 1u);
    ASSERT_EQ(r.heatmap.height, 3u);
    ASSERT_EQ(r.heatmap.width, 3u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(r.heatmap.values[i], static_cast<float>(i) / 8.0f) << i;
}

// Net negative channel weighting: every cell clamps to 0 and the map stays all zeros.
TEST(Gradcam, AllNegativeGivesZeroMap) {
    const auto r = scnn::gradcam(toy_model(-0.5f, 0.25f), ramp());
    for (float v : r.heatmap.values) EXPECT_EQ(v, 0.0f);
}

TEST(Gradcam, ExplicitTargetClass) {
    // Class 0 has all-zero weights, so its gradient and heatmap vanish.
    const auto r = scnn::gradcam(toy_model(0.5f, -0.25f), ramp(), "lastConv", 0);
    EXPECT_EQ(r.target, 0u);
    for (float v : r.heatmap.values) EXPECT_EQ(v, 0.0f);
    EXPECT_THROW(scnn::gradcam(toy_model(0.5f, -0.25f), ramp(), "lastConv", 2), std::invalid_argument);
}

TEST(Gradcam, RequiresConvLayer) {
    EXPECT_THROW(scnn::gradcam(toy_model(1, 1), ramp(), "output_layer"), std::invalid_argument);
    EXPECT_THROW(scnn::gradcam(toy_model(1, 1), ramp(), "missing"), std::invalid_argument);
}

TEST(Gradcam, RangeAndShapeOnSlimModel) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const scnn::Model m = small_slim(seed);
        const auto r = scnn::gradcam(m, blob_image(20, 20));
        const auto& lc = m.layer(m.index_of("lastConv")).out_shape;
        EXPECT_EQ(r.heatmap.height, lc[0]);
        EXPECT_EQ(r.heatmap.width, lc[1]);
        float mx = 0;
        for (float v : r.heatmap.values) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
            mx = std::max(mx, v);
        }
        EXPECT_TRUE(mx == 1.0f || mx == 0.0f);
    }
}

// Multiplying the output layer by c > 0 scales every gradient by c; the
// normalisation cancels it.
TEST(Gradcam, InvariantToPositiveScoreScaling) {
    scnn::Model m = small_slim(3);
    const Tensor x = blob_image(20, 20);
    const auto base = scnn::gradcam(m, x, "lastConv", 1);
    auto& out = m.layers().back().dense();
    for (float& v : out.weights.data()) v *= 4.0f;
    for (float& v : out.bias.data()) v *= 4.0f;
    const auto scaled = scnn::gradcam(m, x, "lastConv", 1);
    for (std::size_t i = 0; i < base.heatmap.values.size(); ++i)
        EXPECT_NEAR(base.heatmap.values[i], scaled.heatmap.values[i], 1e-5);
}

// The gradient feeding the channel weights against central differences of the
// class score evaluated from the captured activations onward.
TEST(Gradcam, ActivationGradientMatchesFiniteDifferences) {
    const scnn::Model m = small_slim(4);
    const Tensor x = blob_image(20, 20);
    const auto tr = scnn::forward_trace(m, x);
    const std::size_t lc = m.index_of("lastConv");
    Tensor dscore(tr.logits().shape());
    dscore[2] = 1.0f;
    const Tensor g = scnn::backward(m, tr, dscore, nullptr, lc);
    Tensor a = tr.outputs[lc];
    const double h = 1e-2;
    for (std::size_t i = 0; i < a.size(); i += 3) {
        const float orig = a[i];
        a[i] = orig + static_cast<float>(h);
        const double up = scnn::forward_from(m, lc + 1, a)[2];
        a[i] = orig - static_cast<float>(h);
        const double down = scnn::forward_from(m, lc + 1, a)[2];
        a[i] = orig;
        EXPECT_NEAR(g[i], (up - down) / (2 * h), 1e-3 + 1e-2 * std::fabs(g[i])) << i;
    }
}

TEST(Jet, Anchors) {
    EXPECT_EQ(scnn::jet(0.0), (std::array<std::uint8_t, 3>{0, 0, 128}));
    EXPECT_EQ(scnn::jet(0.5), (std::array<std::uint8_t, 3>{128, 255, 128}));
    EXPECT_EQ(scnn::jet(1.0), (std::array<std::uint8_t, 3>{128, 0, 0}));
    EXPECT_EQ(scnn::jet(0.25), (std::array<std::uint8_t, 3>{0, 128, 255}));
    EXPECT_EQ(scnn::jet(-3.0), scnn::jet(0.0));
    EXPECT_EQ(scnn::jet(7.0), scnn::jet(1.0));
}

TEST(Resize, CornerAlignedCentre) {
    const scnn::Heatmap hm{2, 2, {0, 1, 1, 0}};
    const auto r = scnn::resize_bilinear(hm, 3, 3);
    EXPECT_FLOAT_EQ(r.at(1, 1), 0.5f);
    EXPECT_FLOAT_EQ(r.at(0, 2), 1.0f);
    EXPECT_FLOAT_EQ(r.at(2, 2), 0.0f);
}

TEST(Superimpose, BlendArithmetic) {
    const Tensor gray(Shape{1, 2, 1}, {100.0f / 255.0f, 1.0f});
    const scnn::Heatmap hm{1, 2, {1.0f, 0.0f}};
    const auto img = scnn::superimpose(hm, gray, 0.4);
    EXPECT_EQ(img.at(0, 0), (std::array<std::uint8_t, 3>{151, 100, 100}));
    // 255 + 0.4 * (0, 0, 128) clamps to white.
    EXPECT_EQ(img.at(0, 1), (std::array<std::uint8_t, 3>{255, 255, 255}));
    EXPECT_THROW(scnn::superimpose(scnn::Heatmap{2, 2, {0, 0, 0, 0}}, gray, 0.4), std::invalid_argument);
    EXPECT_THROW(scnn::superimpose(hm, gray, -1.0), std::invalid_argument);
}

TEST(HeatmapImages, GreyAndJetPanels) {
    const scnn::Heatmap hm{1, 3, {0.0f, 0.5f, 1.0f}};
    const auto grey = scnn::grey_heatmap_image(hm);
    EXPECT_EQ(grey.at(0, 1), (std::array<std::uint8_t, 3>{128, 128, 128}));
    const auto jet = scnn::jet_heatmap_image(hm);
    EXPECT_EQ(jet.at(0, 0), scnn::jet(0.0));
    EXPECT_EQ(jet.at(0, 2), scnn::jet(1.0));
}

class RenderTest : public ::testing::Test {
protected:
    void SetUp() override {
        scnn_test::make_two_class_tree(dir_ / "src", 6, 20, 9);
        scnn::split_folders(dir_ / "src", dir_ / "d2", {0.5, 0.0, 0.5, 888});
        model_ = scnn::build_slim_cnn({20, 20, 1, {4, 6, 6}, 3, 0, 2, 8, 2});
        scnn::init_weights(model_, 11);
        model_.class_names = {"left", "right"};
    }
    scnn_test::TempDir dir_;
    scnn::Model model_{Shape{1, 1, 1}};
};

TEST_F(RenderTest, GridHasOneRowPerCase) {
    for (std::size_t m : {2u, 4u}) {
        scnn::ExplainOptions o;
        o.data_dir = dir_ / "d2";
        o.m = m;
        const auto g = scnn::render_cases(model_, o);
        ASSERT_EQ(g.cases.size(), m);
        EXPECT_GT(g.grid.width, 4 * 20u);
        for (const auto& c : g.cases) {
            EXPECT_NE(c.path.string().find("test"), std::string::npos);
            EXPECT_EQ(c.path.parent_path().filename().string(), c.truth);
            EXPECT_EQ(c.superimposed.width, 20u);
        }
    }
    scnn::ExplainOptions o;
    o.data_dir = dir_ / "d2";
    o.m = 2;
    const auto two = scnn::render_cases(model_, o);
    o.m = 4;
    const auto four = scnn::render_cases(model_, o);
    EXPECT_GT(four.grid.height, two.grid.height);
    EXPECT_EQ(four.grid.width, two.grid.width);
}

TEST_F(RenderTest, SeededSelectionAndByteIdenticalFiles) {
    scnn::ExplainOptions o;
    o.data_dir = dir_ / "d2";
    const auto a = scnn::write_explanations(scnn::render_cases(model_, o), dir_ / "a");
    const auto b = scnn::write_explanations(scnn::render_cases(model_, o), dir_ / "b");
    ASSERT_EQ(a.size(), 5u);
    EXPECT_EQ(a.back().filename(), "cases_grid.png");
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].filename(), b[i].filename());
        EXPECT_EQ(scnn_test::read_bytes(a[i]), scnn_test::read_bytes(b[i]));
    }
    EXPECT_EQ(scnn::select_cases(o), scnn::select_cases(o));
}

TEST_F(RenderTest, ExplicitCasesKeepOrderAndStems) {
    const auto files = scnn::list_files(dir_ / "d2" / "test" / "right");
    ASSERT_GE(files.size(), 2u);
    scnn::ExplainOptions o;
    o.cases = {files[1], files[0]};
    const auto g = scnn::render_cases(model_, o);
    ASSERT_EQ(g.cases.size(), 2u);
    EXPECT_EQ(g.cases[0].path, files[1]);
    EXPECT_EQ(g.cases[0].truth, "right");
    const auto written = scnn::write_explanations(g, dir_ / "out");
    EXPECT_EQ(written[0].filename(), files[1].stem().string() + "_gradcam.png");
    o.cases = {dir_ / "missing.png"};
    EXPECT_THROW(scnn::render_cases(model_, o), std::exception);
}
