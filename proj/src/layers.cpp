#include "scnn/layers.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace scnn {

namespace {

void require_hwc(const Tensor& x, const char* what) {
    if (x.shape().rank() != 3) throw std::invalid_argument(std::string(what) + " expects an (h, w, c) tensor, got " + x.shape().str());
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (!(t.shape() == expected))
        throw std::invalid_argument(std::string(what) + ": expected shape " + expected.str() + ", got " + t.shape().str());
}

}  // namespace

ConvParams ConvParams::zeros(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out, Extent2 stride,
                             Extent2 padding) {
    if (stride.h == 0 || stride.w == 0) throw std::invalid_argument("conv stride must be positive");
    return ConvParams{Tensor(Shape{kh, kw, c_in, c_out}), Tensor(Shape{c_out}), stride, padding};
}

DenseParams DenseParams::zeros(std::size_t n_in, std::size_t n_out) {
    return DenseParams{Tensor(Shape{n_in, n_out}), Tensor(Shape{n_out})};
}

Extent2 conv2d_out_shape(Extent2 in, Extent2 filter, Extent2 padding, Extent2 stride) {
    if (filter.h == 0 || filter.w == 0 || stride.h == 0 || stride.w == 0)
        throw std::invalid_argument("conv filter and stride must be positive");
    if (in.h + 2 * padding.h < filter.h || in.w + 2 * padding.w < filter.w)
        throw std::invalid_argument("conv filter larger than padded input");
    return {(in.h + 2 * padding.h - filter.h) / stride.h + 1, (in.w + 2 * padding.w - filter.w) / stride.w + 1};
}

std::uint64_t conv2d_params(std::size_t kh, std::size_t kw, std::size_t c_in, std::size_t c_out) {
    return static_cast<std::uint64_t>(kh) * kw * c_in * c_out + c_out;
}

Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
    require_hwc(x, "conv2d_forward");
    const std::size_t h = x.shape()[0], w = x.shape()[1], cin = x.shape()[2];
    if (cin != p.in_channels())
        throw std::invalid_argument("conv2d_forward: input has " + std::to_string(cin) + " channels, kernel expects " +
                                    std::to_string(p.in_channels()));
    const std::size_t kh = p.kh(), kw = p.kw(), cout = p.out_channels();
    const Extent2 out = conv2d_out_shape({h, w}, {kh, kw}, p.padding, p.stride);

    Tensor y(Shape{out.h, out.w, cout});
    const float* xs = x.raw();
    const float* ks = p.kernels.raw();
    const float* bs = p.bias.raw();
    float* ys = y.raw();

    for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
            float* yrow = ys + (oy * out.w + ox) * cout;
            for (std::size_t co = 0; co < cout; ++co) yrow[co] = bs[co];
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride.h + ky) - static_cast<std::ptrdiff_t>(p.padding.h);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride.w + kx) - static_cast<std::ptrdiff_t>(p.padding.w);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    const float* xpix = xs + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
                    const float* kslab = ks + (ky * kw + kx) * cin * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const float xv = xpix[ci];
                        const float* krow = kslab + ci * cout;
                        for (std::size_t co = 0; co < cout; ++co) yrow[co] += xv * krow[co];
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward_accumulate(const Tensor& x, const ConvParams& p, const Tensor& dy, Tensor* dx, Tensor& dkernels,
                                Tensor& dbias) {
    require_hwc(x, "conv2d_backward");
    const std::size_t h = x.shape()[0], w = x.shape()[1], cin = x.shape()[2];
    if (cin != p.in_channels()) throw std::invalid_argument("conv2d_backward: channel mismatch");
    const std::size_t kh = p.kh(), kw = p.kw(), cout = p.out_channels();
    const Extent2 out = conv2d_out_shape({h, w}, {kh, kw}, p.padding, p.stride);
    require_shape(dy, Shape{out.h, out.w, cout}, "conv2d_backward dy");
    require_shape(dkernels, p.kernels.shape(), "conv2d_backward dkernels");
    require_shape(dbias, p.bias.shape(), "conv2d_backward dbias");
    if (dx) {
        if (!(dx->shape() == x.shape())) *dx = Tensor(x.shape());
        else dx->fill(0.0f);
    }

    const float* xs = x.raw();
    const float* ks = p.kernels.raw();
    const float* dys = dy.raw();
    float* dks = dkernels.raw();
    float* dbs = dbias.raw();
    float* dxs = dx ? dx->raw() : nullptr;

    for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
            const float* g = dys + (oy * out.w + ox) * cout;
            for (std::size_t co = 0; co < cout; ++co) dbs[co] += g[co];
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * p.stride.h + ky) - static_cast<std::ptrdiff_t>(p.padding.h);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * p.stride.w + kx) - static_cast<std::ptrdiff_t>(p.padding.w);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    const std::size_t pix = (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
                    const std::size_t slab = (ky * kw + kx) * cin * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const float xv = xs[pix + ci];
                        float* dkrow = dks + slab + ci * cout;
                        for (std::size_t co = 0; co < cout; ++co) dkrow[co] += xv * g[co];
                        if (dxs) {
                            const float* krow = ks + slab + ci * cout;
                            float acc = 0.0f;
                            for (std::size_t co = 0; co < cout; ++co) acc += krow[co] * g[co];
                            dxs[pix + ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy) {
    ConvGrads g{Tensor(x.shape()), Tensor(p.kernels.shape()), Tensor(p.bias.shape())};
    conv2d_backward_accumulate(x, p, dy, &g.dx, g.dkernels, g.dbias);
    return g;
}

Extent2 maxpool_out_shape(Extent2 in, const PoolParams& p) {
    if (p.pool.h == 0 || p.pool.w == 0 || p.stride.h == 0 || p.stride.w == 0)
        throw std::invalid_argument("pool size and stride must be positive");
    if (p.pool.h > in.h || p.pool.w > in.w) throw std::invalid_argument("pool larger than input");
    return {(in.h - p.pool.h) / p.stride.h + 1, (in.w - p.pool.w) / p.stride.w + 1};
}

PoolResult maxpool_forward(const Tensor& x, const PoolParams& p) {
    require_hwc(x, "maxpool_forward");
    const std::size_t h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
    if (x.size() > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("maxpool input too large");
    const Extent2 out = maxpool_out_shape({h, w}, p);

    PoolResult r{Tensor(Shape{out.h, out.w, c}), std::vector<std::uint32_t>(out.h * out.w * c)};
    const float* xs = x.raw();
    for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                std::size_t best = ((oy * p.stride.h) * w + ox * p.stride.w) * c + ch;
                float best_v = xs[best];
                for (std::size_t py = 0; py < p.pool.h; ++py) {
                    for (std::size_t px = 0; px < p.pool.w; ++px) {
                        const std::size_t src = ((oy * p.stride.h + py) * w + ox * p.stride.w + px) * c + ch;
                        if (xs[src] > best_v) {
                            best_v = xs[src];
                            best = src;
                        }
                    }
                }
                const std::size_t o = (oy * out.w + ox) * c + ch;
                r.y[o] = best_v;
                r.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return r;
}

Tensor maxpool_backward(std::span<const std::uint32_t> argmax, const Tensor& dy, const Shape& in_shape) {
    if (argmax.size() != dy.size()) throw std::invalid_argument("maxpool_backward: argmax map does not match dy");
    Tensor dx(in_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        if (argmax[i] >= dx.size()) throw std::invalid_argument("maxpool_backward: argmax index out of range");
        dx[argmax[i]] += dy[i];
    }
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    relu_inplace(y);
    return y;
}

void relu_inplace(Tensor& x) {
    for (float& v : x.data())
        if (!(v > 0.0f)) v = 0.0f;
}

Tensor relu_grad(const Tensor& x, const Tensor& dy) {
    require_shape(dy, x.shape(), "relu_grad");
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
    return dx;
}

Tensor flatten(const Tensor& x) { return reshape(x, Shape{x.size()}); }

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
    if (x.size() != p.inputs())
        throw std::invalid_argument("dense_forward: input length " + std::to_string(x.size()) + ", weights expect " +
                                    std::to_string(p.inputs()));
    const std::size_t n_in = p.inputs(), n_out = p.outputs();
    Tensor y = p.bias;
    float* ys = y.raw();
    const float* ws = p.weights.raw();
    for (std::size_t i = 0; i < n_in; ++i) {
        const float xv = x[i];
        if (xv == 0.0f) continue;
        const float* wrow = ws + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) ys[j] += xv * wrow[j];
    }
    return y;
}

void dense_backward_accumulate(const Tensor& x, const DenseParams& p, const Tensor& dy, Tensor* dx, Tensor& dweights,
                               Tensor& dbias) {
    const std::size_t n_in = p.inputs(), n_out = p.outputs();
    if (x.size() != n_in) throw std::invalid_argument("dense_backward: input length mismatch");
    require_shape(dy, Shape{n_out}, "dense_backward dy");
    require_shape(dweights, p.weights.shape(), "dense_backward dweights");
    require_shape(dbias, p.bias.shape(), "dense_backward dbias");

    const float* ws = p.weights.raw();
    const float* g = dy.raw();
    float* dws = dweights.raw();
    for (std::size_t j = 0; j < n_out; ++j) dbias[j] += g[j];
    if (dx) {
        if (!(dx->shape() == x.shape())) *dx = Tensor(x.shape());
    }
    for (std::size_t i = 0; i < n_in; ++i) {
        const float xv = x[i];
        const float* wrow = ws + i * n_out;
        float* dwrow = dws + i * n_out;
        if (xv != 0.0f)
            for (std::size_t j = 0; j < n_out; ++j) dwrow[j] += xv * g[j];
        if (dx) {
            float acc = 0.0f;
            for (std::size_t j = 0; j < n_out; ++j) acc += wrow[j] * g[j];
            (*dx)[i] = acc;
        }
    }
}

DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy) {
    DenseGrads g{Tensor(x.shape()), Tensor(p.weights.shape()), Tensor(p.bias.shape())};
    dense_backward_accumulate(x, p, dy, &g.dx, g.dweights, g.dbias);
    return g;
}

std::uint64_t dense_params(std::size_t n_in, std::size_t n_out) {
    return static_cast<std::uint64_t>(n_in) * n_out + n_out;
}

}  // namespace scnn
