#include "scnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace scnn {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank)
        throw std::invalid_argument("shape rank must be 1..4, got " + std::to_string(dims_.size()));
    count_ = 1;
    for (std::size_t d : dims_) {
        if (d == 0) throw std::invalid_argument("shape dimension must be positive");
        if (count_ > std::numeric_limits<std::size_t>::max() / d)
            throw std::overflow_error("shape element count overflows");
        count_ *= d;
    }
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ", ";
        os << dims_[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_.count(), fill) {
    if (shape_.rank() == 0) throw std::invalid_argument("tensor needs a non-empty shape");
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_.rank() == 0) throw std::invalid_argument("tensor needs a non-empty shape");
    if (data_.size() != shape_.count())
        throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_.str());
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.rank()) throw std::out_of_range("index rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape_[axis]) throw std::out_of_range("index out of range on axis " + std::to_string(axis));
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

float& Tensor::at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }
float Tensor::at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor reshape(const Tensor& t, const Shape& shape) {
    if (shape.count() != t.size())
        throw std::invalid_argument("cannot reshape " + t.shape().str() + " to " + shape.str());
    return Tensor(shape, std::vector<float>(t.data().begin(), t.data().end()));
}

Tensor reduce(const Tensor& t, std::span<const std::size_t> axes, ReduceMode mode) {
    const std::size_t rank = t.shape().rank();
    std::vector<bool> reduced(rank, false);
    for (std::size_t a : axes) {
        if (a >= rank) throw std::out_of_range("reduce axis " + std::to_string(a) + " out of range");
        reduced[a] = true;
    }

    std::vector<std::size_t> kept;
    for (std::size_t a = 0; a < rank; ++a)
        if (!reduced[a]) kept.push_back(t.shape()[a]);
    Shape out_shape = kept.empty() ? Shape{1} : Shape(kept);

    std::size_t group = 1;
    for (std::size_t a = 0; a < rank; ++a)
        if (reduced[a]) group *= t.shape()[a];

    std::vector<double> acc(out_shape.count(), mode == ReduceMode::Max ? -std::numeric_limits<double>::infinity() : 0.0);

    // Walk every element with a mixed-radix counter and map it to its output slot.
    std::vector<std::size_t> idx(rank, 0);
    const auto& dims = t.shape().dims();
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        std::size_t out = 0;
        for (std::size_t a = 0; a < rank; ++a)
            if (!reduced[a]) out = out * dims[a] + idx[a];
        const double v = t[flat];
        if (mode == ReduceMode::Max)
            acc[out] = std::max(acc[out], v);
        else
            acc[out] += v;
        for (std::size_t a = rank; a-- > 0;) {
            if (++idx[a] < dims[a]) break;
            idx[a] = 0;
        }
    }

    Tensor out(out_shape);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out[i] = static_cast<float>(mode == ReduceMode::Mean ? acc[i] / static_cast<double>(group) : acc[i]);
    return out;
}

Tensor reduce(const Tensor& t, std::initializer_list<std::size_t> axes, ReduceMode mode) {
    std::vector<std::size_t> v(axes);
    return reduce(t, std::span<const std::size_t>(v), mode);
}

}  // namespace scnn
