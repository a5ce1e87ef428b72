#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "scnn/data.hpp"
#include "scnn/model.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

struct LossResult {
    double loss = 0.0;  // mean over the batch
    Tensor dlogits;     // (softmax - onehot) / b
};

// logits and onehot are (b, k); every onehot row must hold a single 1.
LossResult softmax_ce_from_logits(const Tensor& logits, const Tensor& onehot);

struct AdamConfig {
    float lr = 0.001f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-7f;
};

// First/second moment accumulators for a list of weight tensors.
class AdamState {
public:
    AdamState(std::span<const Tensor* const> weights, AdamConfig config = {});
    explicit AdamState(const Model& m, AdamConfig config = {});

    const AdamConfig& config() const { return config_; }
    std::uint64_t step_count() const { return t_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

    // m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    // w <- w - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    void step(std::span<Tensor* const> weights, std::span<const Tensor> grads);

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t t_ = 0;
};

void adam_step(AdamState& state, Model& m, const Gradients& grads);

// Glorot-uniform weights in (-L, L), L = sqrt(6 / (fan_in + fan_out)); biases zero.
// Conv fans are kh*kw*c_in and kh*kw*c_out; dense fans are n_in and n_out.
void init_weights(Model& m, std::uint64_t seed);
double glorot_limit(const LayerNode& node);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};
using History = std::vector<EpochRecord>;

struct FitOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 888;
    AdamConfig adam;
    // When non-empty: epoch_<n>.scnn and history.csv are written here after every epoch.
    std::filesystem::path checkpoint_dir;
    std::function<void(const EpochRecord&)> on_epoch;
};

// Mini-batch Adam training. Train accuracy and loss come from the forward pass
// used for each update (pre-update weights); validation runs after the epoch
// with frozen weights. Throws NumericError on a non-finite loss.
History fit(Model& m, const DatasetIndex& train, const DatasetIndex& val, const FitOptions& options);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::size_t> truth;
    std::vector<std::size_t> predicted;
};
Evaluation evaluate(const Model& m, const DatasetIndex& ds, std::size_t batch_size = 32);

inline constexpr const char* kHistoryHeader = "epoch,train_loss,train_acc,val_loss,val_acc";
void write_history_csv(const History& history, const std::filesystem::path& path);
std::filesystem::path epoch_checkpoint_name(std::size_t epoch);

}  // namespace scnn
