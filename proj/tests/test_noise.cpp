#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "nad/kernels_ref.hpp"
#include "nad/noise.hpp"
#include "nad/rng.hpp"
#include "support/stats.hpp"

using namespace nad;
using test_support::ks_two_sample_p;
using test_support::lag1_autocorr;
using test_support::mean_of;
using test_support::pearson;
using test_support::std_of;

TEST_SUITE("noise") {

TEST_CASE("pixelwise: sigma 0 gives an all-zero field") {
    const Tensor f = noise::gen_pixelwise({8, 8}, 0.0, 42);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 0.0f);
}

TEST_CASE("determinism per seed for every kind") {
    const std::vector<std::size_t> shape{16, 16};
    for (int kind = 0; kind < 3; ++kind) {
        noise::NoiseSpec spec;
        spec.kind = static_cast<noise::Kind>(kind);
        spec.alpha = 4;
        spec.sigma = 0.3;
        const auto a = noise::generate(spec, shape, 99).values;
        const auto b = noise::generate(spec, shape, 99).values;
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
        const auto c = noise::generate(spec, shape, 100).values;
        CHECK(std::memcmp(a.data(), c.data(), a.size() * sizeof(float)) != 0);
    }
}

TEST_CASE("pixelwise Monte Carlo statistics") {
    // Pooled over many seeds the sample mean approaches 0 and std the
    // generating sigma.
    const std::size_t fields = 2000, H = 32, W = 32;
    double s = 0.0, s2 = 0.0;
    const double n = static_cast<double>(fields * H * W);
    for (std::size_t k = 0; k < fields; ++k) {
        const Tensor f = noise::gen_pixelwise({H, W}, 0.2, derive_seed(7, {k}));
        for (std::size_t i = 0; i < f.size(); ++i) {
            s += f[i];
            s2 += static_cast<double>(f[i]) * f[i];
        }
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::fabs(mean) < 0.01);
    CHECK(sd == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("negative sigma rejected") {
    CHECK_THROWS_AS(noise::gen_pixelwise({8, 8}, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(noise::gen_coarse({8, 8}, 4, -0.1, 1), std::invalid_argument);
}

TEST_CASE("coarse: alpha 1 is a constant field") {
    const Tensor f = noise::gen_coarse({32, 32}, 1, 0.2, 5);
    for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] == f[0]);
}

TEST_CASE("coarse: alpha above a spatial dim rejected") {
    CHECK_THROWS_AS(noise::gen_coarse({16, 32}, 17, 0.2, 1), std::invalid_argument);
    CHECK_NOTHROW(noise::gen_coarse({16, 32}, 16, 0.2, 1));
}

TEST_CASE("coarse at full resolution matches the pixelwise distribution (KS)") {
    std::vector<double> a, b;
    for (std::size_t k = 0; k < 20; ++k) {
        const Tensor fa = noise::gen_coarse({32, 32}, 32, 0.2, derive_seed(11, {k}));
        const Tensor fb = noise::gen_pixelwise({32, 32}, 0.2, derive_seed(12, {k}));
        for (std::size_t i = 0; i < fa.size(); ++i) {
            a.push_back(fa[i]);
            b.push_back(fb[i]);
        }
    }
    CHECK(ks_two_sample_p(a, b) > 0.01);
}

TEST_CASE("coarse interpolation variance against the Monte-Carlo oracle") {
    // alpha=16 on 128x128, sigma=0.2. The oracle runs the same sampling
    // through the serial reference upsampler (translation permutes values
    // and cannot change pooled statistics).
    const std::size_t fields = 10000, A = 16, H = 128, W = 128;
    double impl_s = 0.0, impl_s2 = 0.0, orac_s = 0.0, orac_s2 = 0.0;
    const double n = static_cast<double>(fields * H * W);
    std::vector<double> off_node_sq(fields);  // per-sample value at an off-node pixel
    std::vector<float> grid(A * A), up(H * W);
    for (std::size_t k = 0; k < fields; ++k) {
        const Tensor f = noise::gen_coarse({H, W}, A, 0.2, derive_seed(21, {k}));
        for (std::size_t i = 0; i < f.size(); ++i) {
            impl_s += f[i];
            impl_s2 += static_cast<double>(f[i]) * f[i];
        }
        // Oracle: same draw path (grid row-major), naive serial upsample.
        Rng rng(derive_seed(22, {k}));
        for (auto& g : grid) g = static_cast<float>(rng.normal(0.0, 0.2));
        kern_ref::upsample_bilinear(grid.data(), A, A, up.data(), H, W);
        for (std::size_t i = 0; i < up.size(); ++i) {
            orac_s += up[i];
            orac_s2 += static_cast<double>(up[i]) * up[i];
        }
        // Pixel (4,4) sits between source nodes for the 16->128 map.
        off_node_sq[k] = static_cast<double>(up[4 * W + 4]) * up[4 * W + 4];
    }
    const double impl_mean = impl_s / n, orac_mean = orac_s / n;
    const double impl_std = std::sqrt(impl_s2 / n - impl_mean * impl_mean);
    const double orac_std = std::sqrt(orac_s2 / n - orac_mean * orac_mean);
    CHECK(std::fabs(impl_std - orac_std) < 0.005);
    CHECK(std::fabs(impl_mean) < 0.01);
    // Pointwise std strictly below the generating sigma away from nodes.
    CHECK(std::sqrt(mean_of(off_node_sq)) < 0.19);
}

TEST_CASE("simplex: deterministic and bounded") {
    noise::SimplexParams p;
    p.octaves = 1;
    p.base_frequency = 0.05;
    const Tensor a = noise::gen_simplex({64, 64}, p, 31);
    const Tensor b = noise::gen_simplex({64, 64}, p, 31);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] >= -1.0f);
        CHECK(a[i] <= 1.0f);
    }
}

TEST_CASE("simplex parameter validation") {
    noise::SimplexParams p;
    p.octaves = 0;
    CHECK_THROWS_AS(noise::gen_simplex({8, 8}, p, 1), std::invalid_argument);
    p.octaves = 1;
    p.base_frequency = -0.5;
    CHECK_THROWS_AS(noise::gen_simplex({8, 8}, p, 1), std::invalid_argument);
}

TEST_CASE("simplex carries low-frequency content (lag-1 autocorrelation)") {
    noise::SimplexParams p;
    const std::size_t H = 64, W = 64;
    std::vector<double> simplex_r, pixel_r;
    for (std::size_t k = 0; k < 10; ++k) {
        const Tensor s = noise::gen_simplex({H, W}, p, derive_seed(41, {k}));
        const Tensor g = noise::gen_pixelwise({H, W}, 1.0, derive_seed(42, {k}));
        std::vector<double> sv(s.data(), s.data() + s.size());
        std::vector<double> gv(g.data(), g.data() + g.size());
        simplex_r.push_back(lag1_autocorr(sv, H, W));
        pixel_r.push_back(lag1_autocorr(gv, H, W));
    }
    CHECK(mean_of(simplex_r) > mean_of(pixel_r));
    CHECK(mean_of(simplex_r) > 0.3);
    CHECK(std::fabs(mean_of(pixel_r)) < 0.05);
}

TEST_CASE("wrap_translate") {
    Tensor f({3, 3});
    for (std::size_t i = 0; i < 9; ++i) f[i] = static_cast<float>(i);

    SUBCASE("zero offsets: identity") {
        const Tensor t = noise::wrap_translate(f, {0, 0});
        CHECK(std::memcmp(t.data(), f.data(), 9 * sizeof(float)) == 0);
    }
    SUBCASE("offsets equal to dims: identity") {
        const Tensor t = noise::wrap_translate(f, {3, 3});
        CHECK(std::memcmp(t.data(), f.data(), 9 * sizeof(float)) == 0);
    }
    SUBCASE("shift (1,2) matches the hand-rolled permutation") {
        const Tensor t = noise::wrap_translate(f, {1, 2});
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 3; ++x)
                CHECK(t[y * 3 + x] == f[((y + 3 - 1) % 3) * 3 + (x + 3 - 2) % 3]);
    }
    SUBCASE("value multiset preserved for random offsets") {
        Rng rng(51);
        for (int rep = 0; rep < 10; ++rep) {
            const auto oy = static_cast<std::int64_t>(rng.uniform_int(7));
            const auto ox = static_cast<std::int64_t>(rng.uniform_int(7));
            const Tensor t = noise::wrap_translate(f, {oy, ox});
            std::multiset<float> ma(f.data(), f.data() + 9), mb(t.data(), t.data() + 9);
            CHECK(ma == mb);
        }
    }
}

TEST_CASE("channels from derived sub-seeds are uncorrelated") {
    noise::NoiseSpec spec;
    spec.kind = noise::Kind::coarse;
    spec.alpha = 8;
    spec.sigma = 1.0;
    std::vector<double> c0, c1;
    for (std::size_t k = 0; k < 16; ++k) {
        const Tensor f = noise::generate_channels(spec, 2, {25, 25}, derive_seed(61, {k}));
        for (std::size_t i = 0; i < 625; ++i) {
            c0.push_back(f[i]);
            c1.push_back(f[625 + i]);
        }
    }
    CHECK(std::fabs(pearson(c0, c1)) < 0.02);
}

TEST_CASE("standardized fields have unit pooled variance") {
    const Tensor f = noise::standardized(noise::gen_coarse({64, 64}, 8, 0.2, 71));
    CHECK(pooled_var(f) == doctest::Approx(1.0).epsilon(1e-4));
    // all-constant fields pass through unchanged
    Tensor c({4, 4}, 3.0f);
    const Tensor sc = noise::standardized(c);
    CHECK(sc[0] == 3.0f);
}

TEST_CASE("3D coarse noise generates and translates") {
    const Tensor f = noise::gen_coarse({8, 8, 8}, 4, 0.2, 81);
    CHECK(f.ndim() == 3);
    CHECK(all_finite(f));
    const Tensor g = noise::gen_coarse({8, 8, 8}, 8, 0.2, 82);
    CHECK(all_finite(g));
}

}  // TEST_SUITE
