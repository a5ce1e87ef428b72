#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "scnn/tensor.hpp"

namespace scnn {

struct Extent2 {
    std::size_t h = 0;
    std::size_t w = 0;
    bool operator==(const Extent2&) const = default;
};

// kernels (kh, kw, c_in, c_out), bias (c_out,)
struct ConvParams {
    Tensor kernels;
    Tensor bias;
    Extent2 stride{1, 1};
    Extent2 padding{0, 0};

    std::size_t kh() const { return kernels.shape()[0]; }
    std::size_t kw() const { return kernels.shape()[1]; }
    std::size_t in_channels() const { return kernels.shape()[2]; }
    std::size_t out_channels() const { return kernels.shape()[3]; }

    static ConvParams zeros(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out,
                            Extent2 stride = {1, 1}, Extent2 padding = {0, 0});
};

struct PoolParams {
    Extent2 pool{2, 2};
    Extent2 stride{2, 2};

    // Stride defaults to the pool size.
    static PoolParams square(std::size_t size) { return {{size, size}, {size, size}}; }
};

// weights (n_in, n_out), bias (n_out,)
struct DenseParams {
    Tensor weights;
    Tensor bias;

    std::size_t inputs() const { return weights.shape()[0]; }
    std::size_t outputs() const { return weights.shape()[1]; }

    static DenseParams zeros(std::size_t n_in, std::size_t n_out);
};

// floor((h + 2p - k) / s) + 1 per axis
Extent2 conv2d_out_shape(Extent2 in, Extent2 filter, Extent2 padding, Extent2 stride);
std::uint64_t conv2d_params(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out);

// x (h, w, c_in) -> (h', w', c_out)
Tensor conv2d_forward(const Tensor& x, const ConvParams& p);

struct ConvGrads {
    Tensor dx;
    Tensor dkernels;
    Tensor dbias;
};
ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy);
// Adds the kernel/bias gradients into dkernels/dbias; writes dx only when it is non-null.
void conv2d_backward_accumulate(const Tensor& x, const ConvParams& p, const Tensor& dy, Tensor* dx,
                                Tensor& dkernels, Tensor& dbias);

// floor((h - ph) / sh) + 1 per axis
Extent2 maxpool_out_shape(Extent2 in, const PoolParams& p);

struct PoolResult {
    Tensor y;
    // Flat index into x of the winning element for every output entry.
    std::vector<std::uint32_t> argmax;
};
// Ties go to the first element in row-major window order.
PoolResult maxpool_forward(const Tensor& x, const PoolParams& p);
Tensor maxpool_backward(std::span<const std::uint32_t> argmax, const Tensor& dy, const Shape& in_shape);

Tensor relu(const Tensor& x);
void relu_inplace(Tensor& x);
// dx = dy where x > 0, else 0 (subgradient 0 at x == 0)
Tensor relu_grad(const Tensor& x, const Tensor& dy);

Tensor flatten(const Tensor& x);

// x (n_in,) -> (n_out,)
Tensor dense_forward(const Tensor& x, const DenseParams& p);

struct DenseGrads {
    Tensor dx;
    Tensor dweights;
    Tensor dbias;
};
DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy);
void dense_backward_accumulate(const Tensor& x, const DenseParams& p, const Tensor& dy, Tensor* dx,
                               Tensor& dweights, Tensor& dbias);
std::uint64_t dense_params(std::size_t n_in, std::size_t n_out);

}  // namespace scnn
