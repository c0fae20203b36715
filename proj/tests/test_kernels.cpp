#include <doctest.h>

#include <cstring>
#include <vector>

#include "nad/kernels.hpp"
#include "nad/kernels_ref.hpp"
#include "nad/rng.hpp"

using namespace nad;
using kern::i64;

namespace {

std::vector<float> randn(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// Rounding-level agreement: FMA contraction may differ between the OpenMP
// and reference loop structures.
bool close_enough(const std::vector<float>& a, const std::vector<float>& b, double tol = 1e-5) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(1.0, std::fabs(static_cast<double>(a[i])));
        if (std::fabs(static_cast<double>(a[i]) - b[i]) > tol * scale) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("conv2d forward matches the serial reference") {
    const i64 N = 2, Cin = 3, H = 9, W = 11, Cout = 4;
    for (const auto [K, pad] : {std::pair<i64, i64>{3, 1}, {1, 0}, {5, 2}}) {
        const auto x = randn(N * Cin * H * W, 1);
        const auto w = randn(Cout * Cin * K * K, 2);
        const auto b = randn(Cout, 3);
        std::vector<float> y1(N * Cout * H * W), y2(y1.size());
        kern::conv2d_forward(x.data(), w.data(), b.data(), y1.data(), N, Cin, H, W, Cout, K, pad);
        kern_ref::conv2d_forward(x.data(), w.data(), b.data(), y2.data(), N, Cin, H, W, Cout, K, pad);
        CHECK(close_enough(y1, y2));
    }
}

TEST_CASE("conv2d backward-data matches the serial reference") {
    const i64 N = 2, Cin = 3, H = 8, W = 7, Cout = 5, K = 3, pad = 1;
    const auto dy = randn(N * Cout * H * W, 4);
    const auto w = randn(Cout * Cin * K * K, 5);
    std::vector<float> dx1(N * Cin * H * W), dx2(dx1.size());
    kern::conv2d_backward_data(dy.data(), w.data(), dx1.data(), N, Cin, H, W, Cout, K, pad);
    kern_ref::conv2d_backward_data(dy.data(), w.data(), dx2.data(), N, Cin, H, W, Cout, K, pad);
    CHECK(close_enough(dx1, dx2));
}

TEST_CASE("conv2d backward-weights matches the serial reference") {
    const i64 N = 2, Cin = 2, H = 6, W = 9, Cout = 3, K = 3, pad = 1;
    const auto x = randn(N * Cin * H * W, 6);
    const auto dy = randn(N * Cout * H * W, 7);
    std::vector<float> dw1(Cout * Cin * K * K), dw2(dw1.size()), db1(Cout), db2(Cout);
    kern::conv2d_backward_weights(x.data(), dy.data(), dw1.data(), db1.data(), N, Cin, H, W, Cout,
                                  K, pad);
    kern_ref::conv2d_backward_weights(x.data(), dy.data(), dw2.data(), db2.data(), N, Cin, H, W,
                                      Cout, K, pad);
    CHECK(close_enough(dw1, dw2));
    CHECK(close_enough(db1, db2));
}

TEST_CASE("transposed conv agrees with a naive scatter evaluation") {
    const i64 N = 2, Cin = 3, H = 4, W = 5, Cout = 2;
    const auto x = randn(N * Cin * H * W, 8);
    const auto w = randn(Cin * Cout * 4, 9);
    const auto b = randn(Cout, 10);
    std::vector<float> y(N * Cout * 2 * H * 2 * W);
    kern::tconv2d_forward(x.data(), w.data(), b.data(), y.data(), N, Cin, H, W, Cout);

    // Naive: out[oy][ox] += w[ic][oc][oy%2][ox%2] * x[oy/2][ox/2]
    std::vector<float> ref(y.size());
    for (i64 n = 0; n < N; ++n)
        for (i64 oc = 0; oc < Cout; ++oc)
            for (i64 oy = 0; oy < 2 * H; ++oy)
                for (i64 ox = 0; ox < 2 * W; ++ox) {
                    float acc = b[oc];
                    for (i64 ic = 0; ic < Cin; ++ic)
                        acc += w[((ic * Cout + oc) * 2 + (oy & 1)) * 2 + (ox & 1)] *
                               x[((n * Cin + ic) * H + oy / 2) * W + ox / 2];
                    ref[((n * Cout + oc) * 2 * H + oy) * 2 * W + ox] = acc;
                }
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-6));
}

TEST_CASE("transposed conv backward is consistent with the forward map") {
    // dx = d(sum(y * dy))/dx: check one entry against a finite difference.
    const i64 N = 1, Cin = 2, H = 3, W = 3, Cout = 2;
    auto x = randn(N * Cin * H * W, 11);
    const auto w = randn(Cin * Cout * 4, 12);
    const auto dy = randn(N * Cout * 4 * H * W, 13);
    std::vector<float> dx(x.size()), dw(w.size()), db(Cout);
    kern::tconv2d_backward_data(dy.data(), w.data(), dx.data(), N, Cin, H, W, Cout);
    kern::tconv2d_backward_weights(x.data(), dy.data(), dw.data(), db.data(), N, Cin, H, W, Cout);

    auto objective = [&](const std::vector<float>& xx, const std::vector<float>& ww) {
        std::vector<float> y(N * Cout * 4 * H * W);
        kern::tconv2d_forward(xx.data(), ww.data(), static_cast<const float*>(nullptr), y.data(), N,
                              Cin, H, W, Cout);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * dy[i];
        return s;
    };
    const double h = 1e-3;
    for (const std::size_t i : {std::size_t{0}, std::size_t{7}, x.size() - 1}) {
        auto xp = x, xm = x;
        xp[i] += static_cast<float>(h);
        xm[i] -= static_cast<float>(h);
        const double fd = (objective(xp, w) - objective(xm, w)) / (2 * h);
        CHECK(dx[i] == doctest::Approx(fd).epsilon(2e-3));
    }
    for (const std::size_t i : {std::size_t{0}, w.size() - 1}) {
        auto wp = w, wm = w;
        wp[i] += static_cast<float>(h);
        wm[i] -= static_cast<float>(h);
        const double fd = (objective(x, wp) - objective(x, wm)) / (2 * h);
        CHECK(dw[i] == doctest::Approx(fd).epsilon(2e-3));
    }
}

TEST_CASE("groupnorm forward matches the serial reference") {
    const i64 N = 3, C = 8, spatial = 25, groups = 4;
    const auto x = randn(N * C * spatial, 14);
    std::vector<float> gamma(C), beta(C);
    Rng rng(15);
    for (auto& g : gamma) g = static_cast<float>(rng.uniform(0.5, 1.5));
    for (auto& b : beta) b = static_cast<float>(rng.normal(0.0, 0.2));
    std::vector<float> y1(x.size()), y2(x.size()), m1(N * groups), m2(N * groups), r1(N * groups),
        r2(N * groups);
    kern::groupnorm_forward(x.data(), gamma.data(), beta.data(), y1.data(), m1.data(), r1.data(), N,
                            C, spatial, groups, 1e-5);
    kern_ref::groupnorm_forward(x.data(), gamma.data(), beta.data(), y2.data(), m2.data(),
                                r2.data(), N, C, spatial, groups, 1e-5);
    CHECK(close_enough(y1, y2));
    CHECK(close_enough(m1, m2));
}

TEST_CASE("groupnorm output is normalized per group") {
    const i64 N = 2, C = 8, spatial = 64, groups = 2;
    const auto x = randn(N * C * spatial, 16);
    std::vector<float> gamma(C, 1.0f), beta(C, 0.0f);
    std::vector<float> y(x.size()), m(N * groups), r(N * groups);
    kern::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(), m.data(), r.data(), N, C,
                            spatial, groups, 1e-5);
    const i64 gsize = (C / groups) * spatial;
    for (i64 n = 0; n < N; ++n)
        for (i64 g = 0; g < groups; ++g) {
            double s = 0.0, s2 = 0.0;
            for (i64 i = 0; i < gsize; ++i) {
                const double v = y[(n * C + g * (C / groups)) * spatial + i];
                s += v;
                s2 += v * v;
            }
            CHECK(s / gsize == doctest::Approx(0.0).epsilon(1e-4));
            CHECK(s2 / gsize == doctest::Approx(1.0).epsilon(1e-3));
        }
}

TEST_CASE("bilinear upsample matches the serial reference") {
    for (const auto [sh, sw, dh, dw] :
         {std::array<i64, 4>{4, 4, 16, 16}, {16, 16, 16, 16}, {1, 1, 8, 8}, {3, 5, 17, 12}}) {
        const auto src = randn(sh * sw, 17 + sh);
        std::vector<float> d1(dh * dw), d2(dh * dw);
        kern::upsample_bilinear(src.data(), sh, sw, d1.data(), dh, dw);
        kern_ref::upsample_bilinear(src.data(), sh, sw, d2.data(), dh, dw);
        CHECK(close_enough(d1, d2));
    }
}

TEST_CASE("identity-size upsample is the identity") {
    const auto src = randn(8 * 8, 19);
    std::vector<float> dst(8 * 8);
    kern::upsample_bilinear(src.data(), 8, 8, dst.data(), 8, 8);
    CHECK(bit_equal(src, dst));
}

TEST_CASE("median filter matches the naive sliding-window oracle") {
    Rng rng(20);
    for (int rep = 0; rep < 20; ++rep) {
        const i64 H = 9, W = 9;
        const auto src = randn(H * W, 21 + rep);
        for (const i64 k : {1, 3, 5}) {
            std::vector<float> d1(H * W), d2(H * W);
            kern::median_filter2d(src.data(), d1.data(), H, W, k);
            kern_ref::median_filter2d(src.data(), d2.data(), H, W, k);
            CHECK(bit_equal(d1, d2));
        }
    }
}

TEST_CASE("conv3d forward agrees with direct evaluation") {
    const i64 N = 1, Cin = 2, D = 4, H = 5, W = 6, Cout = 3, K = 3, pad = 1;
    const auto x = randn(N * Cin * D * H * W, 22);
    const auto w = randn(Cout * Cin * K * K * K, 23);
    const auto b = randn(Cout, 24);
    std::vector<float> y(N * Cout * D * H * W);
    kern::conv3d_forward(x.data(), w.data(), b.data(), y.data(), N, Cin, D, H, W, Cout, K, pad);
    for (const auto [oc, oz, oy, ox] :
         {std::array<i64, 4>{0, 0, 0, 0}, {2, 3, 4, 5}, {1, 2, 2, 3}}) {
        double acc = b[oc];
        for (i64 ic = 0; ic < Cin; ++ic)
            for (i64 kz = 0; kz < K; ++kz)
                for (i64 ky = 0; ky < K; ++ky)
                    for (i64 kx = 0; kx < K; ++kx) {
                        const i64 iz = oz + kz - pad, iy = oy + ky - pad, ix = ox + kx - pad;
                        if (iz < 0 || iz >= D || iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        acc += static_cast<double>(w[(((oc * Cin + ic) * K + kz) * K + ky) * K + kx]) *
                               x[((ic * D + iz) * H + iy) * W + ix];
                    }
        CHECK(y[((oc * D + oz) * H + oy) * W + ox] == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("avgpool2d forward/backward") {
    const i64 N = 1, C = 2, H = 4, W = 4;
    const auto x = randn(N * C * H * W, 25);
    std::vector<float> y(N * C * 2 * 2);
    kern::avgpool2d_forward(x.data(), y.data(), N, C, H, W);
    CHECK(y[0] == doctest::Approx((x[0] + x[1] + x[4] + x[5]) / 4.0f));
    std::vector<float> dx(x.size());
    kern::avgpool2d_backward(y.data(), dx.data(), N, C, H, W);
    CHECK(dx[0] == doctest::Approx(y[0] / 4.0f));
}

}  // TEST_SUITE
