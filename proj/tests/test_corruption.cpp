#include <doctest.h>

#include <cmath>

#include "nad/noise.hpp"
#include "nad/rng.hpp"
#include "nad/schedule.hpp"
#include "support/stats.hpp"

using namespace nad;

TEST_SUITE("corruption") {

TEST_CASE("make_schedule: single-step product") {
    const auto s = diffusion::make_schedule(1, 0.5, 0.5);
    REQUIRE(s.alpha_bars.size() == 2);
    CHECK(s.alpha_bars[0] == 1.0);
    CHECK(s.alpha_bars[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("make_schedule: hand product for T=2") {
    const auto s = diffusion::make_schedule(2, 0.1, 0.2);
    CHECK(s.betas[0] == doctest::Approx(0.1));
    CHECK(s.betas[1] == doctest::Approx(0.2));
    CHECK(s.alpha_bars[1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.alpha_bars[2] == doctest::Approx(0.72).epsilon(1e-12));
}

TEST_CASE("rescaled linear schedule keeps the terminal endpoint near zero") {
    for (const std::size_t T : {std::size_t{1000}, std::size_t{200}, std::size_t{50}}) {
        const auto s = diffusion::make_rescaled_linear_schedule(T);
        CHECK(s.alpha_bars[0] == 1.0);
        CHECK(s.alpha_bars[T] < 1e-4);
        // Cross-check the cumulative product against a direct oracle.
        double prod = 1.0;
        for (std::size_t t = 1; t <= T; ++t) {
            prod *= 1.0 - s.betas[t - 1];
            CHECK(s.alpha_bars[t] == doctest::Approx(prod).epsilon(1e-12));
        }
    }
}

TEST_CASE("alpha_bars are strictly decreasing") {
    const auto s = diffusion::make_rescaled_linear_schedule(100);
    for (std::size_t t = 1; t <= 100; ++t) CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
}

TEST_CASE("make_schedule rejects invalid ranges") {
    CHECK_THROWS_AS(diffusion::make_schedule(0, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(diffusion::make_schedule(10, 0.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(diffusion::make_schedule(10, 0.3, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(diffusion::make_schedule(10, 0.3, 1.0), std::invalid_argument);
}

TEST_CASE("dae_corrupt basics") {
    Tensor x({1, 4, 4});
    Rng rng(1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    Tensor n({1, 4, 4}, 1.0f);

    SUBCASE("sigma 0 returns x") {
        const Tensor y = diffusion::dae_corrupt(x, n, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
    }
    SUBCASE("zero image, unit noise, sigma 0.2") {
        Tensor z({1, 4, 4}, 0.0f);
        const Tensor y = diffusion::dae_corrupt(z, n, 0.2);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(0.2f));
    }
    SUBCASE("difference equals sigma times noise") {
        Tensor nr({1, 4, 4});
        for (std::size_t i = 0; i < nr.size(); ++i) nr[i] = static_cast<float>(rng.normal());
        const Tensor y = diffusion::dae_corrupt(x, nr, 0.7);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] - x[i] == doctest::Approx(0.7f * nr[i]).epsilon(1e-5));
    }
    SUBCASE("linearity in noise and image") {
        Tensor n2({1, 4, 4});
        for (std::size_t i = 0; i < n2.size(); ++i) n2[i] = static_cast<float>(rng.normal());
        const Tensor a = diffusion::dae_corrupt(x, n2, 0.4);
        Tensor n2_scaled(n2.dims());
        for (std::size_t i = 0; i < n2.size(); ++i) n2_scaled[i] = 2.0f * n2[i];
        const Tensor b = diffusion::dae_corrupt(x, n2_scaled, 0.2);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    }
    SUBCASE("shape mismatch rejected") {
        Tensor bad({1, 2, 2}, 0.0f);
        CHECK_THROWS_AS(diffusion::dae_corrupt(x, bad, 0.1), std::invalid_argument);
    }
}

TEST_CASE("ddpm_corrupt endpoints") {
    const auto s = diffusion::make_rescaled_linear_schedule(200);
    Tensor x({1, 4, 4});
    Tensor n({1, 4, 4});
    Rng rng(2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<float>(rng.normal());
        n[i] = static_cast<float>(rng.normal());
    }
    SUBCASE("t=1 with a tiny beta is close to x") {
        const Tensor y = diffusion::ddpm_corrupt(x, n, 1, s);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(0.1));
    }
    SUBCASE("t=T is close to n") {
        const Tensor y = diffusion::ddpm_corrupt(x, n, 200, s);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(n[i]).epsilon(0.05));
    }
    SUBCASE("t out of range rejected") {
        CHECK_THROWS_AS(diffusion::ddpm_corrupt(x, n, 0, s), std::invalid_argument);
        CHECK_THROWS_AS(diffusion::ddpm_corrupt(x, n, 201, s), std::invalid_argument);
    }
}

TEST_CASE("ddpm_corrupt Monte-Carlo variance on a zero image") {
    const auto s = diffusion::make_rescaled_linear_schedule(100);
    const Tensor zero({1, 8, 8}, 0.0f);
    for (const std::size_t t : {std::size_t{20}, std::size_t{50}, std::size_t{90}}) {
        double s2 = 0.0;
        const std::size_t fields = 10000;
        for (std::size_t k = 0; k < fields; ++k) {
            const Tensor n = noise::gen_pixelwise({8, 8}, 1.0, derive_seed(91, {t, k}));
            Tensor nc({1, 8, 8});
            std::copy(n.data(), n.data() + 64, nc.data());
            const Tensor y = diffusion::ddpm_corrupt(zero, nc, t, s);
            for (std::size_t i = 0; i < y.size(); ++i) s2 += static_cast<double>(y[i]) * y[i];
        }
        const double var = s2 / static_cast<double>(fields * 64);
        CHECK(var == doctest::Approx(1.0 - s.alpha_bar(t)).epsilon(0.02));
    }
}

TEST_CASE("variance preservation for unit-variance inputs") {
    const auto s = diffusion::make_rescaled_linear_schedule(100);
    // Fixed image standardized to unit pooled variance (zero mean).
    Tensor x({1, 16, 16});
    Rng rng(3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    const double m = pooled_mean(x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>((x[i] - m));
    const double sd = std::sqrt(pooled_var(x));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(x[i] / sd);

    for (const std::size_t t : {std::size_t{25}, std::size_t{75}}) {
        double s2 = 0.0, s1 = 0.0;
        const std::size_t fields = 4000;
        for (std::size_t k = 0; k < fields; ++k) {
            const Tensor n = noise::gen_pixelwise({16, 16}, 1.0, derive_seed(95, {t, k}));
            Tensor nc({1, 16, 16});
            std::copy(n.data(), n.data() + 256, nc.data());
            const Tensor y = diffusion::ddpm_corrupt(x, nc, t, s);
            for (std::size_t i = 0; i < y.size(); ++i) {
                s1 += y[i];
                s2 += static_cast<double>(y[i]) * y[i];
            }
        }
        const double n_total = static_cast<double>(fields * 256);
        const double var = s2 / n_total - (s1 / n_total) * (s1 / n_total);
        CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    }
}

TEST_CASE("corruption distance increases stochastically with t") {
    const auto s = diffusion::make_rescaled_linear_schedule(100);
    Tensor x({1, 8, 8});
    Rng rng(4);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    auto mean_dist = [&](std::size_t t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 100; ++k) {
            const Tensor n = noise::gen_pixelwise({8, 8}, 1.0, derive_seed(97, {t, k}));
            Tensor nc({1, 8, 8});
            std::copy(n.data(), n.data() + 64, nc.data());
            const Tensor y = diffusion::ddpm_corrupt(x, nc, t, s);
            double d = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i)
                d += (y[i] - x[i]) * static_cast<double>(y[i] - x[i]);
            acc += std::sqrt(d);
        }
        return acc / 100.0;
    };
    const double d10 = mean_dist(10), d50 = mean_dist(50), d90 = mean_dist(90);
    CHECK(d10 < d50);
    CHECK(d50 < d90);
}

}  // TEST_SUITE
