#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scnn/layers.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

enum class LayerKind { Input, Conv2D, MaxPool, Flatten, Dense };

std::string_view kind_name(LayerKind kind);

struct LayerNode {
    LayerKind kind = LayerKind::Input;
    std::string name;
    // ReLU fused onto conv/dense outputs.
    bool relu = false;
    std::variant<std::monostate, ConvParams, PoolParams, DenseParams> params;
    // Per-sample output shape (no batch axis).
    Shape out_shape;

    std::uint64_t param_count() const;
    ConvParams& conv() { return std::get<ConvParams>(params); }
    const ConvParams& conv() const { return std::get<ConvParams>(params); }
    DenseParams& dense() { return std::get<DenseParams>(params); }
    const DenseParams& dense() const { return std::get<DenseParams>(params); }
    const PoolParams& pool() const { return std::get<PoolParams>(params); }
};

// A sequential network. The first node is always the input node; the last
// node is expected to be a dense layer emitting raw class scores.
class Model {
public:
    explicit Model(Shape input_shape);

    // Unnamed layers get Keras-style names: conv2d, conv2d_1, ...
    Model& conv2d(std::size_t filters, Extent2 kernel, bool relu, std::string name = {}, Extent2 stride = {1, 1},
                  Extent2 padding = {0, 0});
    Model& maxpool(PoolParams pool, std::string name = {});
    Model& flatten(std::string name = {});
    Model& dense(std::size_t units, bool relu, std::string name = {});

    const std::vector<LayerNode>& layers() const { return layers_; }
    std::vector<LayerNode>& layers() { return layers_; }
    const LayerNode& layer(std::size_t i) const { return layers_.at(i); }
    LayerNode& layer(std::size_t i) { return layers_.at(i); }
    std::size_t size() const { return layers_.size(); }

    const Shape& input_shape() const { return layers_.front().out_shape; }
    std::size_t num_classes() const { return layers_.back().out_shape.count(); }

    std::optional<std::size_t> find(std::string_view name) const;
    // Throws std::invalid_argument for unknown names.
    std::size_t index_of(std::string_view name) const;

    std::uint64_t param_count() const;

    // Trainable tensors in layer order, kernels before biases.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    // Optional labels for the output scores, in class-index order.
    std::vector<std::string> class_names;

private:
    std::string unique_name(std::string requested, std::string_view base);
    Extent2 last_spatial(const char* what) const;

    std::vector<LayerNode> layers_;
};

struct SlimCnnConfig {
    std::size_t height = 128;
    std::size_t width = 128;
    std::size_t channels = 1;
    std::array<std::size_t, 3> filters{128, 256, 256};
    std::size_t kernel = 3;
    std::size_t conv_padding = 0;
    std::size_t pool = 2;
    std::size_t dense_units = 256;
    std::size_t classes = 4;
};

// input -> conv relu -> pool -> conv relu -> pool -> conv relu "lastConv"
//       -> flatten -> dense relu -> dense "output_layer"
Model build_slim_cnn(const SlimCnnConfig& config = {});

inline constexpr std::string_view kLastConvName = "lastConv";
inline constexpr std::string_view kOutputLayerName = "output_layer";

// Per-sample activations of one forward pass. outputs[i] is the (post-ReLU)
// output of layer i; outputs[0] is the input sample.
struct Trace {
    std::vector<Tensor> outputs;
    std::vector<std::vector<std::uint32_t>> argmax;

    const Tensor& logits() const { return outputs.back(); }
};

Trace forward_trace(const Model& m, const Tensor& sample);
// Runs layers first_layer..end on the given input and returns the logits.
Tensor forward_from(const Model& m, std::size_t first_layer, const Tensor& input);

struct ForwardResult {
    Tensor logits;                    // (b, k)
    std::optional<Tensor> captured;   // (b, ...) output of the captured layer
};
ForwardResult forward(const Model& m, const Tensor& batch, std::optional<std::string_view> capture = std::nullopt);

// Lowest index wins ties.
std::size_t argmax(std::span<const float> values);
std::vector<std::size_t> predict(const Model& m, const Tensor& batch);

// Gradient tensors aligned with Model::parameters().
struct Gradients {
    std::vector<Tensor> tensors;
    void zero();
};
Gradients zero_gradients(const Model& m);

// Backpropagates dlogits through a trace. Parameter gradients are added into
// grads when it is non-null. When wrt_layer is set, the gradient with respect
// to that layer's output is returned; otherwise the result is empty.
Tensor backward(const Model& m, const Trace& trace, const Tensor& dlogits, Gradients* grads,
                std::optional<std::size_t> wrt_layer = std::nullopt);

// Keras-style table with a "Total (trainable) params: N (X MB)" footer.
std::string summary(const Model& m);
std::string format_thousands(std::uint64_t value);

void save_checkpoint(const Model& m, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace scnn
