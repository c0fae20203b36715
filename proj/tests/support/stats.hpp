#ifndef NAD_TESTS_STATS_HPP
#define NAD_TESTS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// Statistics helpers for tests: independent of the library implementation.

namespace nad::test_support {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        sa += (a[i] - ma) * (a[i] - ma);
        sb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(sa * sb);
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic, with the usual
/// finite-sample correction of the effective sample size).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n1 = a.size(), n2 = b.size();
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < n1 && j < n2) {
        const double x = std::min(a[i], b[j]);
        while (i < n1 && a[i] <= x) ++i;
        while (j < n2 && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }
    const double ne = std::sqrt(static_cast<double>(n1) * n2 / static_cast<double>(n1 + n2));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

/// Lag-1 spatial autocorrelation along x of a row-major (H, W) field.
inline double lag1_autocorr(const std::vector<double>& field, std::size_t h, std::size_t w) {
    std::vector<double> left, right;
    left.reserve(h * (w - 1));
    right.reserve(h * (w - 1));
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x + 1 < w; ++x) {
            left.push_back(field[y * w + x]);
            right.push_back(field[y * w + x + 1]);
        }
    return pearson(left, right);
}

}  // namespace nad::test_support

#endif
