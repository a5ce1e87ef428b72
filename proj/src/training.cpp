#include "scnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "scnn/errors.hpp"
#include "scnn/random.hpp"

namespace scnn {

Tensor softmax(const Tensor& logits) {
    if (logits.shape().rank() != 2) throw std::invalid_argument("softmax expects (b, k) logits");
    const std::size_t b = logits.shape()[0], k = logits.shape()[1];
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < b; ++r) {
        const float* row = logits.raw() + r * k;
        const float mx = *std::max_element(row, row + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        for (std::size_t j = 0; j < k; ++j)
            out[r * k + j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / sum);
    }
    return out;
}

LossResult softmax_ce_from_logits(const Tensor& logits, const Tensor& onehot) {
    if (logits.shape().rank() != 2 || !(logits.shape() == onehot.shape()))
        throw std::invalid_argument("softmax_ce: logits and onehot must both be (b, k)");
    const std::size_t b = logits.shape()[0], k = logits.shape()[1];

    LossResult r{0.0, Tensor(logits.shape())};
    for (std::size_t row = 0; row < b; ++row) {
        std::size_t truth = k;
        for (std::size_t j = 0; j < k; ++j) {
            const float v = onehot[row * k + j];
            if (v == 1.0f && truth == k) truth = j;
            else if (v != 0.0f) throw std::invalid_argument("softmax_ce: malformed one-hot row " + std::to_string(row));
        }
        if (truth == k) throw std::invalid_argument("softmax_ce: one-hot row " + std::to_string(row) + " has no 1");

        const float* z = logits.raw() + row * k;
        const double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const double log_sum = std::log(sum);
        r.loss += -(z[truth] - mx - log_sum);
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(z[j] - mx - log_sum);
            r.dlogits[row * k + j] = static_cast<float>((p - (j == truth ? 1.0 : 0.0)) / static_cast<double>(b));
        }
    }
    r.loss /= static_cast<double>(b);
    return r;
}

AdamState::AdamState(std::span<const Tensor* const> weights, AdamConfig config) : config_(config) {
    for (const Tensor* w : weights) {
        m_.emplace_back(w->shape());
        v_.emplace_back(w->shape());
    }
}

AdamState::AdamState(const Model& m, AdamConfig config) : AdamState(m.parameters(), config) {}

void AdamState::step(std::span<Tensor* const> weights, std::span<const Tensor> grads) {
    if (weights.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("adam: weight/gradient lists do not match optimizer state");
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const float lr = config_.lr, eps = config_.epsilon;
    const float fb1 = config_.beta1, fb2 = config_.beta2;
    const float inv_c1 = static_cast<float>(1.0 / c1), inv_c2 = static_cast<float>(1.0 / c2);

    for (std::size_t p = 0; p < m_.size(); ++p) {
        Tensor& w = *weights[p];
        const Tensor& g = grads[p];
        if (!(w.shape() == m_[p].shape()) || !(g.shape() == m_[p].shape()))
            throw std::invalid_argument("adam: shape mismatch for parameter " + std::to_string(p));
        float* ws = w.raw();
        float* ms = m_[p].raw();
        float* vs = v_[p].raw();
        const float* gs = g.raw();
        for (std::size_t i = 0; i < w.size(); ++i) {
            ms[i] = fb1 * ms[i] + (1.0f - fb1) * gs[i];
            vs[i] = fb2 * vs[i] + (1.0f - fb2) * gs[i] * gs[i];
            const float m_hat = ms[i] * inv_c1;
            const float v_hat = vs[i] * inv_c2;
            ws[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

void adam_step(AdamState& state, Model& m, const Gradients& grads) {
    std::vector<Tensor*> params = m.parameters();
    state.step(params, grads.tensors);
}

double glorot_limit(const LayerNode& node) {
    double fan_in = 0, fan_out = 0;
    if (node.kind == LayerKind::Conv2D) {
        const auto& p = node.conv();
        const double area = static_cast<double>(p.kh() * p.kw());
        fan_in = area * static_cast<double>(p.in_channels());
        fan_out = area * static_cast<double>(p.out_channels());
    } else if (node.kind == LayerKind::Dense) {
        fan_in = static_cast<double>(node.dense().inputs());
        fan_out = static_cast<double>(node.dense().outputs());
    } else {
        throw std::invalid_argument("glorot_limit: layer has no weights");
    }
    return std::sqrt(6.0 / (fan_in + fan_out));
}

void init_weights(Model& m, std::uint64_t seed) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        LayerNode& node = m.layer(i);
        if (node.kind != LayerKind::Conv2D && node.kind != LayerKind::Dense) continue;
        const double limit = glorot_limit(node);
        Tensor& w = node.kind == LayerKind::Conv2D ? node.conv().kernels : node.dense().weights;
        Tensor& b = node.kind == LayerKind::Conv2D ? node.conv().bias : node.dense().bias;
        Rng rng(mix_seed(seed, i));
        for (float& v : w.data()) {
            v = static_cast<float>(limit * (2.0 * rng.open_unit_float() - 1.0));
            // Keep the float strictly inside the open interval.
            if (std::abs(static_cast<double>(v)) >= limit) v = std::nextafter(v, 0.0f);
        }
        b.fill(0.0f);
    }
}

namespace {

struct BatchStats {
    double loss_sum = 0.0;
    std::size_t correct = 0;
};

// Forward + loss + backward for one batch; parameter gradients land in grads.
// Each sample's dlogits only depends on its own row, so traces are not kept.
BatchStats train_batch(const Model& m, const Batch& batch, Gradients& grads) {
    const std::size_t b = batch.indices.size();
    const std::size_t k = m.num_classes();
    const std::size_t per = m.input_shape().count();

    BatchStats stats;
    grads.zero();
    for (std::size_t s = 0; s < b; ++s) {
        Tensor sample(m.input_shape(), std::vector<float>(batch.x.raw() + s * per, batch.x.raw() + (s + 1) * per));
        const Trace trace = forward_trace(m, sample);
        const Tensor logits = reshape(trace.logits(), Shape{1, k});
        const Tensor onehot(Shape{1, k}, std::vector<float>(batch.onehot.raw() + s * k, batch.onehot.raw() + (s + 1) * k));
        const LossResult loss = softmax_ce_from_logits(logits, onehot);
        if (!std::isfinite(loss.loss)) throw NumericError("non-finite training loss; training diverged");
        stats.loss_sum += loss.loss;
        if (argmax(logits.data()) == argmax(onehot.data())) ++stats.correct;

        Tensor d(Shape{k});
        for (std::size_t j = 0; j < k; ++j) d[j] = loss.dlogits[j] / static_cast<float>(b);
        backward(m, trace, d, &grads);
    }
    return stats;
}

void require_compatible(const Model& m, const DatasetIndex& ds, const char* what) {
    if (ds.empty()) throw std::invalid_argument(std::string(what) + " dataset is empty");
    if (ds.classes.size() != m.num_classes())
        throw std::invalid_argument(std::string(what) + " dataset has " + std::to_string(ds.classes.size()) +
                                    " classes but the model emits " + std::to_string(m.num_classes()) + " scores");
    if (m.input_shape()[2] != 1) throw std::invalid_argument("training expects single-channel model input");
}

}  // namespace

Evaluation evaluate(const Model& m, const DatasetIndex& ds, std::size_t batch_size) {
    require_compatible(m, ds, "evaluation");
    Evaluation ev;
    const std::size_t k = m.num_classes();
    BatchStream stream(ds, batch_size, std::nullopt, m.input_shape()[0], m.input_shape()[1]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    while (auto batch = stream.next()) {
        const ForwardResult r = forward(m, batch->x);
        const LossResult loss = softmax_ce_from_logits(r.logits, batch->onehot);
        loss_sum += loss.loss * static_cast<double>(batch->indices.size());
        for (std::size_t s = 0; s < batch->indices.size(); ++s) {
            const std::size_t pred = argmax(r.logits.data().subspan(s * k, k));
            const std::size_t truth = ds.samples[batch->indices[s]].label;
            ev.predicted.push_back(pred);
            ev.truth.push_back(truth);
            if (pred == truth) ++correct;
        }
    }
    ev.loss = loss_sum / static_cast<double>(ds.size());
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return ev;
}

std::filesystem::path epoch_checkpoint_name(std::size_t epoch) { return "epoch_" + std::to_string(epoch) + ".scnn"; }

void write_history_csv(const History& history, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << kHistoryHeader << '\n';
    char line[256];
    for (const auto& r : history) {
        std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                      r.val_acc);
        os << line;
    }
    if (!os) throw IoError("failed writing " + path.string());
}

History fit(Model& m, const DatasetIndex& train, const DatasetIndex& val, const FitOptions& options) {
    require_compatible(m, train, "training");
    require_compatible(m, val, "validation");
    if (train.classes != val.classes) throw std::invalid_argument("training and validation class lists differ");
    if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

    History history;
    AdamState adam(m, options.adam);
    Gradients grads = zero_gradients(m);
    const std::size_t h = m.input_shape()[0], w = m.input_shape()[1];

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        BatchStream stream(train, options.batch_size, mix_seed(options.seed, epoch), h, w);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        while (auto batch = stream.next()) {
            const BatchStats stats = train_batch(m, *batch, grads);
            loss_sum += stats.loss_sum;
            correct += stats.correct;
            adam_step(adam, m, grads);
        }
        for (const Tensor* p : m.parameters())
            if (!p->all_finite()) throw NumericError("non-finite weights after epoch " + std::to_string(epoch));

        const Evaluation ev = evaluate(m, val, options.batch_size);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()),
                        static_cast<double>(correct) / static_cast<double>(train.size()), ev.loss, ev.accuracy};
        if (!std::isfinite(rec.val_loss)) throw NumericError("non-finite validation loss");
        history.push_back(rec);

        if (!options.checkpoint_dir.empty()) {
            save_checkpoint(m, options.checkpoint_dir / epoch_checkpoint_name(epoch));
            write_history_csv(history, options.checkpoint_dir / "history.csv");
        }
        if (options.on_epoch) options.on_epoch(rec);
    }
    if (!options.checkpoint_dir.empty() && history.empty())
        write_history_csv(history, options.checkpoint_dir / "history.csv");
    return history;
}

}  // namespace scnn
