#pragma once

#include "conncrack/error.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace conncrack::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_volume(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major array. Layers work on rank-4 N x C x H x W tensors.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_volume(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    // NCHW accessors.
    std::size_t n() const { return shape_.at(0); }
    std::size_t c() const { return shape_.at(1); }
    std::size_t h() const { return shape_.at(2); }
    std::size_t w() const { return shape_.at(3); }
    T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T{0}); }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Tensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    void require_same_shape(const Tensor& o, const char* what) const {
        if (o.shape_ != shape_)
            throw DimensionError(std::string(what) + ": shape " + shape_string(shape_) +
                                 " vs " + shape_string(o.shape_));
    }

    void require_rank4(const char* what) const {
        if (shape_.size() != 4)
            throw DimensionError(std::string(what) + ": expected N x C x H x W tensor, got " +
                                 shape_string(shape_));
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
    a.require_same_shape(b, "dot");
    T s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Concatenate two NCHW tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    a.require_rank4("concat");
    b.require_rank4("concat");
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw DimensionError("concat: incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
    Tensor<T> out({a.n(), a.c() + b.c(), a.h(), a.w()});
    const std::size_t plane = a.h() * a.w();
    for (std::size_t n = 0; n < a.n(); ++n) {
        std::copy_n(a.raw() + n * a.c() * plane, a.c() * plane, out.raw() + n * out.c() * plane);
        std::copy_n(b.raw() + n * b.c() * plane, b.c() * plane,
                    out.raw() + (n * out.c() + a.c()) * plane);
    }
    return out;
}

/// Channels [begin, begin + count) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t begin, std::size_t count) {
    t.require_rank4("slice");
    if (begin + count > t.c()) throw DimensionError("slice: channel range out of bounds");
    Tensor<T> out({t.n(), count, t.h(), t.w()});
    const std::size_t plane = t.h() * t.w();
    for (std::size_t n = 0; n < t.n(); ++n)
        std::copy_n(t.raw() + (n * t.c() + begin) * plane, count * plane,
                    out.raw() + n * count * plane);
    return out;
}

} // namespace conncrack::nn
