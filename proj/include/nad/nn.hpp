#ifndef NAD_NN_HPP
#define NAD_NN_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nad/kernels.hpp"
#include "nad/rng.hpp"
#include "nad/tensor.hpp"

// Layer building blocks with explicit forward/backward passes. Layers cache
// whatever the backward pass needs; one forward must be followed by at most
// one backward. All heavy lifting is delegated to nad::kern.

namespace nad::nn {

using kern::i64;

template <typename T>
struct Param {
    std::string name;
    NDArray<T> value;
    NDArray<T> grad;

    void init_shape(std::string n, std::vector<std::size_t> dims) {
        name = std::move(n);
        value = NDArray<T>(dims);
        grad = NDArray<T>(std::move(dims));
    }
};

template <typename T>
NDArray<T> concat_channels(const NDArray<T>& a, const NDArray<T>& b) {
    const i64 N = static_cast<i64>(a.dim(0));
    std::size_t plane = 1;
    for (std::size_t d = 2; d < a.ndim(); ++d) plane *= a.dim(d);
    std::vector<std::size_t> dims = a.dims();
    dims[1] = a.dim(1) + b.dim(1);
    NDArray<T> out(dims);
    const std::size_t ca = a.dim(1), cb = b.dim(1);
    for (i64 n = 0; n < N; ++n) {
        std::copy(a.data() + n * ca * plane, a.data() + (n + 1) * ca * plane,
                  out.data() + n * (ca + cb) * plane);
        std::copy(b.data() + n * cb * plane, b.data() + (n + 1) * cb * plane,
                  out.data() + (n * (ca + cb) + ca) * plane);
    }
    return out;
}

template <typename T>
void split_channels(const NDArray<T>& dy, std::size_t ca, NDArray<T>& da, NDArray<T>& db) {
    const i64 N = static_cast<i64>(dy.dim(0));
    std::size_t plane = 1;
    for (std::size_t d = 2; d < dy.ndim(); ++d) plane *= dy.dim(d);
    const std::size_t cb = dy.dim(1) - ca;
    std::vector<std::size_t> dims_a = dy.dims(), dims_b = dy.dims();
    dims_a[1] = ca;
    dims_b[1] = cb;
    da = NDArray<T>(dims_a);
    db = NDArray<T>(dims_b);
    for (i64 n = 0; n < N; ++n) {
        std::copy(dy.data() + n * (ca + cb) * plane, dy.data() + (n * (ca + cb) + ca) * plane,
                  da.data() + n * ca * plane);
        std::copy(dy.data() + (n * (ca + cb) + ca) * plane, dy.data() + (n + 1) * (ca + cb) * plane,
                  db.data() + n * cb * plane);
    }
}

/// Square conv, stride 1, zero padding, optional weight standardization.
/// Rank 2 or 3 per the activation shape (N,C,H,W) / (N,C,D,H,W).
template <typename T>
class Conv {
public:
    Conv() = default;
    Conv(int rank, std::size_t cin, std::size_t cout, std::size_t k, std::size_t pad,
         bool weight_std, const std::string& name)
        : rank_(rank), cin_(cin), cout_(cout), k_(k), pad_(pad), ws_(weight_std) {
        std::vector<std::size_t> wdims = {cout, cin, k, k};
        if (rank == 3) wdims.push_back(k);
        w_.init_shape(name + ".w", wdims);
        b_.init_shape(name + ".b", {cout});
    }

    void init(Rng& rng) {
        std::size_t fan_in = cin_;
        for (int d = 0; d < rank_; ++d) fan_in *= k_;
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < w_.value.size(); ++i)
            w_.value[i] = static_cast<T>(rng.normal(0.0, std_dev));
        b_.value.fill(T(0));
    }

    NDArray<T> forward(const NDArray<T>& x) {
        x_cache_ = x;
        const NDArray<T>& w_use = ws_ ? standardize_weights() : w_.value;
        NDArray<T> y(out_dims(x));
        dispatch_forward(x, w_use, y);
        return y;
    }

    NDArray<T> backward(const NDArray<T>& dy) {
        const NDArray<T>& w_use = ws_ ? w_hat_ : w_.value;
        NDArray<T> dw_raw(w_.value.dims());
        dispatch_backward_weights(x_cache_, dy, dw_raw);
        if (ws_)
            standardize_backward(dw_raw);
        else
            w_.grad = std::move(dw_raw);
        NDArray<T> dx(x_cache_.dims());
        dispatch_backward_data(dy, w_use, dx);
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    std::vector<std::size_t> out_dims(const NDArray<T>& x) const {
        std::vector<std::size_t> d = x.dims();
        d[1] = cout_;
        return d;
    }

    void dispatch_forward(const NDArray<T>& x, const NDArray<T>& w, NDArray<T>& y) const {
        const auto N = static_cast<i64>(x.dim(0));
        if (rank_ == 2)
            kern::conv2d_forward(x.data(), w.data(), b_.value.data(), y.data(), N,
                                 static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                 static_cast<i64>(x.dim(3)), static_cast<i64>(cout_),
                                 static_cast<i64>(k_), static_cast<i64>(pad_));
        else
            kern::conv3d_forward(x.data(), w.data(), b_.value.data(), y.data(), N,
                                 static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                 static_cast<i64>(x.dim(3)), static_cast<i64>(x.dim(4)),
                                 static_cast<i64>(cout_), static_cast<i64>(k_),
                                 static_cast<i64>(pad_));
    }

    void dispatch_backward_data(const NDArray<T>& dy, const NDArray<T>& w, NDArray<T>& dx) const {
        const auto N = static_cast<i64>(dy.dim(0));
        if (rank_ == 2)
            kern::conv2d_backward_data(dy.data(), w.data(), dx.data(), N, static_cast<i64>(cin_),
                                       static_cast<i64>(dy.dim(2)), static_cast<i64>(dy.dim(3)),
                                       static_cast<i64>(cout_), static_cast<i64>(k_),
                                       static_cast<i64>(pad_));
        else
            kern::conv3d_backward_data(dy.data(), w.data(), dx.data(), N, static_cast<i64>(cin_),
                                       static_cast<i64>(dy.dim(2)), static_cast<i64>(dy.dim(3)),
                                       static_cast<i64>(dy.dim(4)), static_cast<i64>(cout_),
                                       static_cast<i64>(k_), static_cast<i64>(pad_));
    }

    void dispatch_backward_weights(const NDArray<T>& x, const NDArray<T>& dy, NDArray<T>& dw) {
        const auto N = static_cast<i64>(x.dim(0));
        if (rank_ == 2)
            kern::conv2d_backward_weights(x.data(), dy.data(), dw.data(), b_.grad.data(), N,
                                          static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                          static_cast<i64>(x.dim(3)), static_cast<i64>(cout_),
                                          static_cast<i64>(k_), static_cast<i64>(pad_));
        else
            kern::conv3d_backward_weights(x.data(), dy.data(), dw.data(), b_.grad.data(), N,
                                          static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                          static_cast<i64>(x.dim(3)), static_cast<i64>(x.dim(4)),
                                          static_cast<i64>(cout_), static_cast<i64>(k_),
                                          static_cast<i64>(pad_));
    }

    // Weight standardization: w_hat = (w - mean) / sqrt(var + eps), statistics
    // taken per output channel over the fan-in.
    const NDArray<T>& standardize_weights() {
        const std::size_t m = w_.value.size() / cout_;
        w_hat_ = NDArray<T>(w_.value.dims());
        w_rstd_.assign(cout_, T(0));
        for (std::size_t oc = 0; oc < cout_; ++oc) {
            const T* wp = w_.value.data() + oc * m;
            double s = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                s += static_cast<double>(wp[i]);
                s2 += static_cast<double>(wp[i]) * static_cast<double>(wp[i]);
            }
            const double mean = s / static_cast<double>(m);
            const double var = std::max(0.0, s2 / static_cast<double>(m) - mean * mean);
            const double rstd = 1.0 / std::sqrt(var + 1e-5);
            w_rstd_[oc] = static_cast<T>(rstd);
            T* hp = w_hat_.data() + oc * m;
            for (std::size_t i = 0; i < m; ++i)
                hp[i] = static_cast<T>((static_cast<double>(wp[i]) - mean) * rstd);
        }
        return w_hat_;
    }

    void standardize_backward(const NDArray<T>& dw_hat) {
        const std::size_t m = w_.value.size() / cout_;
        for (std::size_t oc = 0; oc < cout_; ++oc) {
            const T* dh = dw_hat.data() + oc * m;
            const T* h = w_hat_.data() + oc * m;
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                m1 += static_cast<double>(dh[i]);
                m2 += static_cast<double>(dh[i]) * static_cast<double>(h[i]);
            }
            m1 /= static_cast<double>(m);
            m2 /= static_cast<double>(m);
            const double rstd = static_cast<double>(w_rstd_[oc]);
            T* dw = w_.grad.data() + oc * m;
            for (std::size_t i = 0; i < m; ++i)
                dw[i] = static_cast<T>(rstd * (static_cast<double>(dh[i]) - m1 -
                                               static_cast<double>(h[i]) * m2));
        }
    }

    int rank_ = 2;
    std::size_t cin_ = 0, cout_ = 0, k_ = 3, pad_ = 1;
    bool ws_ = false;
    Param<T> w_, b_;
    NDArray<T> x_cache_, w_hat_;
    std::vector<T> w_rstd_;
};

/// Transposed conv, kernel 2, stride 2 (doubles each spatial dim).
template <typename T>
class TConv {
public:
    TConv() = default;
    TConv(int rank, std::size_t cin, std::size_t cout, const std::string& name)
        : rank_(rank), cin_(cin), cout_(cout) {
        std::vector<std::size_t> wdims = {cin, cout, 2, 2};
        if (rank == 3) wdims.push_back(2);
        w_.init_shape(name + ".w", wdims);
        b_.init_shape(name + ".b", {cout});
    }

    void init(Rng& rng) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(cin_ * (rank_ == 2 ? 4 : 8)));
        for (std::size_t i = 0; i < w_.value.size(); ++i)
            w_.value[i] = static_cast<T>(rng.normal(0.0, std_dev));
        b_.value.fill(T(0));
    }

    NDArray<T> forward(const NDArray<T>& x) {
        x_cache_ = x;
        std::vector<std::size_t> od = x.dims();
        od[1] = cout_;
        for (std::size_t d = 2; d < od.size(); ++d) od[d] *= 2;
        NDArray<T> y(od);
        const auto N = static_cast<i64>(x.dim(0));
        if (rank_ == 2)
            kern::tconv2d_forward(x.data(), w_.value.data(), b_.value.data(), y.data(), N,
                                  static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                  static_cast<i64>(x.dim(3)), static_cast<i64>(cout_));
        else
            kern::tconv3d_forward(x.data(), w_.value.data(), b_.value.data(), y.data(), N,
                                  static_cast<i64>(cin_), static_cast<i64>(x.dim(2)),
                                  static_cast<i64>(x.dim(3)), static_cast<i64>(x.dim(4)),
                                  static_cast<i64>(cout_));
        return y;
    }

    NDArray<T> backward(const NDArray<T>& dy) {
        const auto N = static_cast<i64>(dy.dim(0));
        NDArray<T> dx(x_cache_.dims());
        if (rank_ == 2) {
            kern::tconv2d_backward_weights(x_cache_.data(), dy.data(), w_.grad.data(),
                                           b_.grad.data(), N, static_cast<i64>(cin_),
                                           static_cast<i64>(x_cache_.dim(2)),
                                           static_cast<i64>(x_cache_.dim(3)),
                                           static_cast<i64>(cout_));
            kern::tconv2d_backward_data(dy.data(), w_.value.data(), dx.data(), N,
                                        static_cast<i64>(cin_), static_cast<i64>(x_cache_.dim(2)),
                                        static_cast<i64>(x_cache_.dim(3)), static_cast<i64>(cout_));
        } else {
            kern::tconv3d_backward_weights(x_cache_.data(), dy.data(), w_.grad.data(),
                                           b_.grad.data(), N, static_cast<i64>(cin_),
                                           static_cast<i64>(x_cache_.dim(2)),
                                           static_cast<i64>(x_cache_.dim(3)),
                                           static_cast<i64>(x_cache_.dim(4)),
                                           static_cast<i64>(cout_));
            kern::tconv3d_backward_data(dy.data(), w_.value.data(), dx.data(), N,
                                        static_cast<i64>(cin_), static_cast<i64>(x_cache_.dim(2)),
                                        static_cast<i64>(x_cache_.dim(3)),
                                        static_cast<i64>(x_cache_.dim(4)), static_cast<i64>(cout_));
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    int rank_ = 2;
    std::size_t cin_ = 0, cout_ = 0;
    Param<T> w_, b_;
    NDArray<T> x_cache_;
};

template <typename T>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(std::size_t channels, std::size_t groups, const std::string& name)
        : channels_(channels), groups_(groups) {
        if (channels % groups != 0)
            throw std::invalid_argument("GroupNorm: groups must divide channels");
        gamma_.init_shape(name + ".gamma", {channels});
        beta_.init_shape(name + ".beta", {channels});
    }

    void init(Rng&) {
        gamma_.value.fill(T(1));
        beta_.value.fill(T(0));
    }

    NDArray<T> forward(const NDArray<T>& x) {
        x_cache_ = x;
        const auto N = static_cast<i64>(x.dim(0));
        std::size_t spatial = 1;
        for (std::size_t d = 2; d < x.ndim(); ++d) spatial *= x.dim(d);
        mean_.assign(x.dim(0) * groups_, T(0));
        rstd_.assign(x.dim(0) * groups_, T(0));
        NDArray<T> y(x.dims());
        kern::groupnorm_forward(x.data(), gamma_.value.data(), beta_.value.data(), y.data(),
                                mean_.data(), rstd_.data(), N, static_cast<i64>(channels_),
                                static_cast<i64>(spatial), static_cast<i64>(groups_), 1e-5);
        return y;
    }

    NDArray<T> backward(const NDArray<T>& dy) {
        const auto N = static_cast<i64>(dy.dim(0));
        std::size_t spatial = 1;
        for (std::size_t d = 2; d < dy.ndim(); ++d) spatial *= dy.dim(d);
        NDArray<T> dx(dy.dims());
        kern::groupnorm_backward(dy.data(), x_cache_.data(), gamma_.value.data(), mean_.data(),
                                 rstd_.data(), dx.data(), gamma_.grad.data(), beta_.grad.data(), N,
                                 static_cast<i64>(channels_), static_cast<i64>(spatial),
                                 static_cast<i64>(groups_));
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    std::size_t channels_ = 0, groups_ = 1;
    Param<T> gamma_, beta_;
    NDArray<T> x_cache_;
    std::vector<T> mean_, rstd_;
};

template <typename T>
class Swish {
public:
    NDArray<T> forward(const NDArray<T>& x) {
        x_cache_ = x;
        NDArray<T> y(x.dims());
        kern::swish_forward(x.data(), y.data(), static_cast<i64>(x.size()));
        return y;
    }
    NDArray<T> backward(const NDArray<T>& dy) {
        NDArray<T> dx(dy.dims());
        kern::swish_backward(dy.data(), x_cache_.data(), dx.data(), static_cast<i64>(dy.size()));
        return dx;
    }

private:
    NDArray<T> x_cache_;
};

template <typename T>
class AvgPool {
public:
    AvgPool() = default;
    explicit AvgPool(int rank) : rank_(rank) {}

    NDArray<T> forward(const NDArray<T>& x) {
        in_dims_ = x.dims();
        std::vector<std::size_t> od = x.dims();
        for (std::size_t d = 2; d < od.size(); ++d) od[d] /= 2;
        NDArray<T> y(od);
        const auto N = static_cast<i64>(x.dim(0));
        const auto C = static_cast<i64>(x.dim(1));
        if (rank_ == 2)
            kern::avgpool2d_forward(x.data(), y.data(), N, C, static_cast<i64>(x.dim(2)),
                                    static_cast<i64>(x.dim(3)));
        else
            kern::avgpool3d_forward(x.data(), y.data(), N, C, static_cast<i64>(x.dim(2)),
                                    static_cast<i64>(x.dim(3)), static_cast<i64>(x.dim(4)));
        return y;
    }

    NDArray<T> backward(const NDArray<T>& dy) {
        NDArray<T> dx(in_dims_);
        const auto N = static_cast<i64>(dx.dim(0));
        const auto C = static_cast<i64>(dx.dim(1));
        if (rank_ == 2)
            kern::avgpool2d_backward(dy.data(), dx.data(), N, C, static_cast<i64>(dx.dim(2)),
                                     static_cast<i64>(dx.dim(3)));
        else
            kern::avgpool3d_backward(dy.data(), dx.data(), N, C, static_cast<i64>(dx.dim(2)),
                                     static_cast<i64>(dx.dim(3)), static_cast<i64>(dx.dim(4)));
        return dx;
    }

private:
    int rank_ = 2;
    std::vector<std::size_t> in_dims_;
};

/// Fully connected y = x W^T + b over (N, Din) -> (N, Dout). Used only for
/// the small timestep-embedding projections, so plain serial loops.
template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(std::size_t din, std::size_t dout, const std::string& name) : din_(din), dout_(dout) {
        w_.init_shape(name + ".w", {dout, din});
        b_.init_shape(name + ".b", {dout});
    }

    void init(Rng& rng) {
        const double std_dev = std::sqrt(2.0 / static_cast<double>(din_));
        for (std::size_t i = 0; i < w_.value.size(); ++i)
            w_.value[i] = static_cast<T>(rng.normal(0.0, std_dev));
        b_.value.fill(T(0));
    }

    NDArray<T> forward(const NDArray<T>& x) {
        x_cache_ = x;
        const std::size_t N = x.dim(0);
        NDArray<T> y({N, dout_});
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < dout_; ++o) {
                T acc = b_.value[o];
                for (std::size_t i = 0; i < din_; ++i)
                    acc += w_.value[o * din_ + i] * x[n * din_ + i];
                y[n * dout_ + o] = acc;
            }
        return y;
    }

    NDArray<T> backward(const NDArray<T>& dy) {
        const std::size_t N = x_cache_.dim(0);
        w_.grad.fill(T(0));
        b_.grad.fill(T(0));
        NDArray<T> dx({N, din_}, T(0));
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < dout_; ++o) {
                const T g = dy[n * dout_ + o];
                b_.grad[o] += g;
                for (std::size_t i = 0; i < din_; ++i) {
                    w_.grad[o * din_ + i] += g * x_cache_[n * din_ + i];
                    dx[n * din_ + i] += g * w_.value[o * din_ + i];
                }
            }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    std::size_t din_ = 0, dout_ = 0;
    Param<T> w_, b_;
    NDArray<T> x_cache_;
};

}  // namespace nad::nn

#endif
