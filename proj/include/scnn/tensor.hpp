#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace scnn {

// Dimensions of a tensor, rank 1..4. Images are (h, w, c), batches are (b, h, w, c).
class Shape {
public:
    static constexpr std::size_t kMaxRank = 4;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
    std::size_t count() const { return count_; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    // "(126, 126, 128)"
    std::string str() const;

    bool operator==(const Shape& other) const { return dims_ == other.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::size_t count_ = 0;
};

// Dense row-major (last dim fastest) grid of 32-bit reals.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    float* raw() { return data_.data(); }
    const float* raw() const { return data_.data(); }

    float& operator[](std::size_t flat) { return data_[flat]; }
    float operator[](std::size_t flat) const { return data_[flat]; }

    // Multi-index access; the number of indices must equal the rank.
    float& at(std::initializer_list<std::size_t> index);
    float at(std::initializer_list<std::size_t> index) const;
    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    void fill(float value);
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

enum class ReduceMode { Sum, Max, Mean };

Tensor reshape(const Tensor& t, const Shape& shape);

// Reduces over the given axes and drops them. Reducing every axis yields shape (1,).
Tensor reduce(const Tensor& t, std::span<const std::size_t> axes, ReduceMode mode);
Tensor reduce(const Tensor& t, std::initializer_list<std::size_t> axes, ReduceMode mode);

}  // namespace scnn
