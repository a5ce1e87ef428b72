#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "scnn/data.hpp"
#include "scnn/errors.hpp"
#include "scnn/model.hpp"
#include "scnn/training.hpp"
#include "support.hpp"

using scnn::Shape;
using scnn::Tensor;

TEST(Softmax, RowsSumToOneAndSurviveLargeLogits) {
    const Tensor z(Shape{2, 3}, {1000.0f, 1001.0f, 1002.0f, -5.0f, 0.0f, 5.0f});
    const Tensor p = scnn::softmax(z);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_TRUE(std::isfinite(p.at({r, k})));
            s += p.at({r, k});
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
    EXPECT_NEAR(p.at({0, 2}), std::exp(2.0) / (1 + std::exp(1.0) + std::exp(2.0)), 1e-6);
}

TEST(SoftmaxCe, MatchesReferenceLoss) {
    const Tensor z(Shape{2, 3}, {0.2f, -1.0f, 3.0f, 1.0f, 1.0f, 1.0f});
    const Tensor y(Shape{2, 3}, {0, 0, 1, 1, 0, 0});
    const auto r = scnn::softmax_ce_from_logits(z, y);
    EXPECT_NEAR(r.loss, scnn_test::ref_softmax_ce(scnn_test::to_vec(z), 3, {2, 0}), 1e-6);
    // Uniform row: loss log 3, gradient (1/3 - y) / b.
    EXPECT_NEAR(r.dlogits.at({1, 0}), (1.0 / 3 - 1) / 2, 1e-6);
    EXPECT_NEAR(r.dlogits.at({1, 1}), (1.0 / 3) / 2, 1e-6);
}

TEST(SoftmaxCe, RejectsBadOneHot) {
    const Tensor z(Shape{1, 3});
    EXPECT_THROW(scnn::softmax_ce_from_logits(z, Tensor(Shape{1, 3}, {1, 1, 0})), std::invalid_argument);
    EXPECT_THROW(scnn::softmax_ce_from_logits(z, Tensor(Shape{1, 2}, {1, 0})), std::invalid_argument);
}

namespace {

// Textbook Adam in double for one scalar.
struct RefAdam {
    double m = 0, v = 0;
    int t = 0;
    double step(double w, double g, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999, double eps = 1e-7) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return w - lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace

TEST(Adam, MatchesReferenceOverSeveralSteps) {
    Tensor w(Shape{3}, {1.0f, -0.5f, 0.0f});
    const std::vector<std::vector<float>> grads = {{0.5f, -2.0f, 1e-4f}, {0.1f, 3.0f, -1e-4f}, {-0.7f, 0.0f, 0.0f}};
    Tensor* ws[1] = {&w};
    const Tensor* cws[1] = {&w};
    scnn::AdamState st(std::span<const Tensor* const>(cws, 1));
    RefAdam ref[3];
    double expect[3] = {1.0, -0.5, 0.0};
    for (const auto& g : grads) {
        const Tensor gt(Shape{3}, g);
        st.step(std::span<Tensor* const>(ws, 1), std::span<const Tensor>(&gt, 1));
        for (int i = 0; i < 3; ++i) expect[i] = ref[i].step(expect[i], g[static_cast<std::size_t>(i)]);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w[i], expect[i], 1e-6) << "step " << st.step_count();
    }
    EXPECT_EQ(st.step_count(), 3u);
    // First step moves every non-zero-gradient weight by about lr.
    EXPECT_NEAR(1.0 - RefAdam{}.step(1.0, 0.5), 1e-3, 1e-9);
}

TEST(Init, GlorotBoundsAndZeroBiases) {
    scnn::Model m = scnn::build_slim_cnn({32, 32, 1, {8, 16, 16}, 3, 0, 2, 16, 4});
    scnn::init_weights(m, 888);
    EXPECT_NEAR(scnn::glorot_limit(m.layer(1)), std::sqrt(6.0 / (9 + 72)), 1e-12);
    for (const auto& node : m.layers()) {
        if (node.kind != scnn::LayerKind::Conv2D && node.kind != scnn::LayerKind::Dense) continue;
        const double L = scnn::glorot_limit(node);
        const Tensor& w = node.kind == scnn::LayerKind::Conv2D ? node.conv().kernels : node.dense().weights;
        const Tensor& b = node.kind == scnn::LayerKind::Conv2D ? node.conv().bias : node.dense().bias;
        double sum = 0;
        for (float v : w.data()) {
            EXPECT_LT(std::fabs(v), L);
            sum += v;
        }
        EXPECT_LT(std::fabs(sum / static_cast<double>(w.size())), L / 3) << node.name;
        for (float v : b.data()) EXPECT_EQ(v, 0.0f);
    }
}

TEST(Init, FullModelFirstConvLimit) {
    const scnn::Model m = scnn::build_slim_cnn();
    EXPECT_NEAR(scnn::glorot_limit(m.layer(1)), 0.0719, 5e-5);
}

TEST(Init, SeededAndReproducible) {
    scnn::Model a = scnn::build_slim_cnn({16, 16, 1, {4, 4, 4}, 3, 1, 2, 8, 2});
    scnn::Model b = a, c = a;
    scnn::init_weights(a, 7);
    scnn::init_weights(b, 7);
    scnn::init_weights(c, 8);
    EXPECT_EQ(scnn_test::to_vec(a.layer(1).conv().kernels), scnn_test::to_vec(b.layer(1).conv().kernels));
    EXPECT_NE(scnn_test::to_vec(a.layer(1).conv().kernels), scnn_test::to_vec(c.layer(1).conv().kernels));
}

class FitTest : public ::testing::Test {
protected:
    void SetUp() override {
        scnn_test::make_two_class_tree(dir_ / "src", 10, 16, 5);
        scnn::split_folders(dir_ / "src", dir_ / "d2", {0.8, 0.1, 0.1, 888});
        train_ = scnn::index_dataset(dir_ / "d2" / "train");
        val_ = scnn::index_dataset(dir_ / "d2" / "val");
    }
    static scnn::Model fresh() {
        scnn::Model m = scnn::build_slim_cnn({16, 16, 1, {4, 8, 8}, 3, 1, 2, 16, 2});
        scnn::init_weights(m, 888);
        return m;
    }
    scnn_test::TempDir dir_;
    scnn::DatasetIndex train_, val_;
};

TEST_F(FitTest, HistoryAndCheckpointsAreBitIdentical) {
    scnn::FitOptions o;
    o.epochs = 2;
    o.batch_size = 4;
    for (const char* run : {"run1", "run2"}) {
        scnn::Model m = fresh();
        o.checkpoint_dir = dir_ / run;
        const auto h = scnn::fit(m, train_, val_, o);
        ASSERT_EQ(h.size(), 2u);
        EXPECT_EQ(h[0].epoch, 1u);
    }
    for (const char* f : {"epoch_1.scnn", "epoch_2.scnn", "history.csv"})
        EXPECT_EQ(scnn_test::read_bytes(dir_ / "run1" / f), scnn_test::read_bytes(dir_ / "run2" / f)) << f;

    std::ifstream in(dir_ / "run1" / "history.csv");
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, scnn::kHistoryHeader);
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2u);
}

TEST_F(FitTest, ZeroEpochsWritesHeaderOnly) {
    scnn::Model m = fresh();
    const auto before = scnn_test::to_vec(m.layer(1).conv().kernels);
    scnn::FitOptions o;
    o.epochs = 0;
    o.checkpoint_dir = dir_ / "zero";
    EXPECT_TRUE(scnn::fit(m, train_, val_, o).empty());
    EXPECT_EQ(scnn_test::to_vec(m.layer(1).conv().kernels), before);
    std::ifstream in(dir_ / "zero" / "history.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), std::string(scnn::kHistoryHeader) + "\n");
}

TEST_F(FitTest, LossFallsOnEasyData) {
    scnn::Model m = fresh();
    scnn::FitOptions o;
    o.epochs = 8;
    o.batch_size = 4;
    o.adam.lr = 3e-3f;
    const auto h = scnn::fit(m, train_, val_, o);
    EXPECT_LT(h.back().train_loss, h.front().train_loss);
}

TEST_F(FitTest, ClassCountMismatchIsRejected) {
    scnn::Model m = scnn::build_slim_cnn({16, 16, 1, {4, 8, 8}, 3, 1, 2, 16, 3});
    scnn::FitOptions o;
    o.epochs = 1;
    EXPECT_THROW(scnn::fit(m, train_, val_, o), std::invalid_argument);
}

TEST_F(FitTest, EvaluateAgreesWithPredict) {
    const scnn::Model m = fresh();
    const auto ds = scnn::index_dataset(dir_ / "d2" / "train");
    const auto ev = scnn::evaluate(m, ds, 3);
    ASSERT_EQ(ev.truth.size(), ds.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Tensor x = scnn::load_grayscale_image(ds.samples[i].path, 16, 16);
        const auto tr = scnn::forward_trace(m, x);
        EXPECT_EQ(ev.predicted[i], scnn::argmax(tr.logits().data()));
        correct += ev.predicted[i] == ev.truth[i];
    }
    EXPECT_DOUBLE_EQ(ev.accuracy, static_cast<double>(correct) / static_cast<double>(ds.size()));
}

TEST(History, CsvFormat) {
    scnn_test::TempDir dir;
    scnn::write_history_csv({{1, 0.5, 0.25, 0.75, 1.0}}, dir / "h.csv");
    std::ifstream in(dir / "h.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.5,0.25,0.75,1\n");
    EXPECT_EQ(scnn::epoch_checkpoint_name(12), "epoch_12.scnn");
}
