#include <gtest/gtest.h>

#include "gradient_suite.hpp"
#include "scnn/model.hpp"
#include "scnn/training.hpp"

using namespace scnn_test;

TEST(Gradients, Conv2d) {
    const auto st = check_conv_gradients(100, 11);
    EXPECT_TRUE(st.ok()) << "worst " << st.worst;
}

TEST(Gradients, MaxPoolOffTie) {
    const auto st = check_maxpool_gradients(100, 12);
    EXPECT_TRUE(st.ok()) << "worst " << st.worst;
}

TEST(Gradients, Dense) {
    const auto st = check_dense_gradients(100, 13);
    EXPECT_TRUE(st.ok()) << "worst " << st.worst;
}

TEST(Gradients, Relu) {
    const auto st = check_relu_gradients(100, 14);
    EXPECT_TRUE(st.ok()) << "worst " << st.worst;
}

TEST(Gradients, SoftmaxCrossEntropy) {
    const auto st = check_softmax_ce_gradients(100, 15);
    EXPECT_TRUE(st.ok()) << "worst " << st.worst;
}

// End to end: parameter gradients of a tiny network against central
// differences of its (double-evaluated) loss.
TEST(Gradients, WholeModelParameters) {
    scnn::Model m(scnn::Shape{6, 6, 1});
    m.conv2d(2, {3, 3}, true).maxpool(scnn::PoolParams::square(2)).flatten().dense(3, true).dense(2, false);
    scnn::init_weights(m, 5);
    for (auto* t : m.parameters())
        for (float& v : t->data()) v += 0.05f;  // non-zero biases, fewer dead units

    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    scnn::Tensor x({6, 6, 1});
    for (float& v : x.data()) v = static_cast<float>(d(gen));
    scnn::Tensor onehot(scnn::Shape{1, 2}, {0.0f, 1.0f});

    const scnn::Trace tr = scnn::forward_trace(m, x);
    const auto loss = scnn::softmax_ce_from_logits(scnn::reshape(tr.logits(), {1, 2}), onehot);
    scnn::Gradients g = scnn::zero_gradients(m);
    scnn::backward(m, tr, scnn::reshape(loss.dlogits, {2}), &g);

    // Float forward is fine here: the step is large relative to float rounding
    // and only the dense layers are checked, which stay away from kinks.
    auto params = m.parameters();
    for (std::size_t pi = 2; pi < params.size(); ++pi) {
        scnn::Tensor& t = *params[pi];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const float orig = t[i];
            auto eval = [&](float v) {
                t[i] = v;
                const auto r = scnn::forward_trace(m, x);
                return scnn::softmax_ce_from_logits(scnn::reshape(r.logits(), {1, 2}), onehot).loss;
            };
            const double h = 1e-2;
            const double fd = (eval(orig + static_cast<float>(h)) - eval(orig - static_cast<float>(h))) / (2 * h);
            t[i] = orig;
            EXPECT_NEAR(g.tensors[pi][i], fd, 2e-3 + 2e-2 * std::fabs(fd)) << "param " << pi << " index " << i;
        }
    }
}
