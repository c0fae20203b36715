#ifndef NAD_TENSOR_HPP
#define NAD_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nad {

/// Dense row-major n-dimensional array. The whole toolkit moves data
/// around as these; shape conventions are documented per module
/// (images are (C,H,W) or (C,D,H,W), batches prepend N).
template <typename T>
class NDArray {
public:
    NDArray() = default;

    explicit NDArray(std::vector<std::size_t> dims, T fill = T(0))
        : dims_(std::move(dims)), data_(checked_count(dims_), fill) {}

    NDArray(std::vector<std::size_t> dims, std::vector<T> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (data_.size() != checked_count(dims_))
            throw std::invalid_argument("NDArray: data size does not match dims");
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t ndim() const { return dims_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }
    const T& at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }
    T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const NDArray& o) const { return dims_ == o.dims_; }

    static std::size_t count(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }

private:
    static std::size_t checked_count(const std::vector<std::size_t>& dims) {
        if (dims.empty()) throw std::invalid_argument("NDArray: rank-0 not supported");
        std::size_t n = 1;
        for (auto d : dims) {
            if (d == 0) throw std::invalid_argument("NDArray: zero dim");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> dims_;
    std::vector<T> data_;
};

using Tensor = NDArray<float>;

template <typename T>
double pooled_mean(const NDArray<T>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]);
    return s / static_cast<double>(a.size());
}

template <typename T>
double pooled_var(const NDArray<T>& a) {
    const double m = pooled_mean(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - m;
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

template <typename T>
bool all_finite(const NDArray<T>& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(static_cast<double>(a[i]))) return false;
    return true;
}

}  // namespace nad

#endif
