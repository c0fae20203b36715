#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "nad/metrics.hpp"
#include "nad/rng.hpp"

using namespace nad;

namespace {

// Brute-force oracles: enumerate every distinct score as a threshold,
// compute the PR point / Dice by direct counting, and integrate or maximize.

double auprc_oracle(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
    std::set<float, std::greater<float>> thresholds(scores.begin(), scores.end());
    const double total_pos = std::count(labels.begin(), labels.end(), std::uint8_t(1));
    double area = 0.0, prev_recall = 0.0;
    for (const float thr : thresholds) {
        double tp = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= thr) {
                if (labels[i]) tp += 1.0;
                else fp += 1.0;
            }
        }
        const double recall = tp / total_pos;
        const double precision = tp / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

std::pair<double, double> ceil_dice_oracle(const std::vector<float>& scores,
                                           const std::vector<std::uint8_t>& labels) {
    std::set<float, std::greater<float>> thresholds(scores.begin(), scores.end());
    const double total_pos = std::count(labels.begin(), labels.end(), std::uint8_t(1));
    double best = -1.0, best_thr = 0.0;
    for (const float thr : thresholds) {
        double tp = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= thr) {
                if (labels[i]) tp += 1.0;
                else fp += 1.0;
            }
        const double dice = 2.0 * tp / (2.0 * tp + fp + (total_pos - tp));
        if (dice > best || (dice == best && thr < best_thr)) {
            best = dice;
            best_thr = thr;
        }
    }
    return {best, best_thr};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfectly separating scores give AUPRC 1") {
    const std::vector<float> s{0.9f, 0.8f, 0.2f, 0.1f};
    const std::vector<std::uint8_t> l{1, 1, 0, 0};
    CHECK(eval::auprc(s, l) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-equal scores give AUPRC equal to prevalence") {
    const std::vector<float> s{0.5f, 0.5f, 0.5f, 0.5f, 0.5f};
    const std::vector<std::uint8_t> l{1, 0, 0, 0, 0};
    CHECK(eval::auprc(s, l) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("six-element hand case matches the enumeration oracle") {
    const std::vector<float> s{0.9f, 0.8f, 0.7f, 0.6f, 0.5f, 0.4f};
    const std::vector<std::uint8_t> l{1, 0, 1, 1, 0, 0};
    CHECK(eval::auprc(s, l) == doctest::Approx(auprc_oracle(s, l)).epsilon(1e-12));
}

TEST_CASE("no positive labels is an error") {
    const std::vector<float> s{0.1f, 0.2f};
    const std::vector<std::uint8_t> l{0, 0};
    CHECK_THROWS_AS(eval::auprc(s, l), std::invalid_argument);
    CHECK_THROWS_AS(eval::ceil_dice(s, l), std::invalid_argument);
}

TEST_CASE("ceil_dice: scores equal to labels reach 1") {
    const std::vector<float> s{1.0f, 0.0f, 1.0f, 0.0f};
    const std::vector<std::uint8_t> l{1, 0, 1, 0};
    const auto [dice, thr] = eval::ceil_dice(s, l);
    CHECK(dice == doctest::Approx(1.0));
    CHECK(thr == doctest::Approx(1.0));
}

TEST_CASE("ceil_dice: anti-correlated scores fall back to predict-everything") {
    // All positives scored lowest: the best threshold admits every pixel,
    // dice = 2P / (2P + N).
    const std::vector<float> s{0.1f, 0.2f, 0.9f, 0.8f, 0.7f};
    const std::vector<std::uint8_t> l{1, 1, 0, 0, 0};
    const auto [dice, thr] = eval::ceil_dice(s, l);
    const auto [odice, othr] = ceil_dice_oracle(s, l);
    CHECK(dice == doctest::Approx(odice).epsilon(1e-12));
    CHECK(thr == doctest::Approx(othr));
    CHECK(dice == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("eight-element hand case matches the exhaustive oracle") {
    const std::vector<float> s{0.9f, 0.1f, 0.8f, 0.4f, 0.4f, 0.3f, 0.95f, 0.2f};
    const std::vector<std::uint8_t> l{1, 0, 0, 1, 0, 1, 1, 0};
    const auto [dice, thr] = eval::ceil_dice(s, l);
    const auto [odice, othr] = ceil_dice_oracle(s, l);
    CHECK(dice == doctest::Approx(odice).epsilon(1e-12));
    CHECK(thr == doctest::Approx(othr));
}

TEST_CASE("random instances match both oracles exactly") {
    Rng rng(1234);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rng.uniform_int(63);
        std::vector<float> s(n);
        std::vector<std::uint8_t> l(n);
        bool any_pos = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse quantization forces plenty of ties.
            s[i] = static_cast<float>(rng.uniform_int(10)) / 10.0f;
            l[i] = rng.uniform() < 0.4 ? 1 : 0;
            any_pos |= l[i] == 1;
        }
        if (!any_pos) l[rng.uniform_int(n)] = 1;
        CHECK(eval::auprc(s, l) == doctest::Approx(auprc_oracle(s, l)).epsilon(1e-12));
        const auto [dice, thr] = eval::ceil_dice(s, l);
        const auto [odice, othr] = ceil_dice_oracle(s, l);
        CHECK(dice == doctest::Approx(odice).epsilon(1e-12));
        CHECK(thr == doctest::Approx(othr));
    }
}

TEST_CASE("both metrics are invariant to strictly increasing transforms") {
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 5 + rng.uniform_int(40);
        std::vector<float> s(n);
        std::vector<std::uint8_t> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<float>(rng.uniform_int(8)) / 8.0f;
            l[i] = rng.uniform() < 0.3 ? 1 : 0;
        }
        l[0] = 1;
        // Scaling by a power of two is an exact strictly increasing map.
        std::vector<float> s4(n);
        for (std::size_t i = 0; i < n; ++i) s4[i] = 4.0f * s[i];
        CHECK(eval::auprc(s, l) == doctest::Approx(eval::auprc(s4, l)).epsilon(1e-12));
        CHECK(eval::ceil_dice(s, l).first == doctest::Approx(eval::ceil_dice(s4, l).first).epsilon(1e-12));
        // Rank mapping preserves ties exactly.
        std::vector<float> sorted(s);
        std::sort(sorted.begin(), sorted.end());
        std::vector<float> ranks(n);
        for (std::size_t i = 0; i < n; ++i)
            ranks[i] = static_cast<float>(
                std::lower_bound(sorted.begin(), sorted.end(), s[i]) - sorted.begin());
        CHECK(eval::auprc(s, l) == doctest::Approx(eval::auprc(ranks, l)).epsilon(1e-12));
    }
}

TEST_CASE("AUPRC is bounded below by prevalence for constant scores") {
    const std::vector<float> s{0.3f, 0.3f, 0.3f, 0.3f};
    const std::vector<std::uint8_t> l{1, 0, 1, 0};
    CHECK(eval::auprc(s, l) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ceil_dice dominates Dice at any fixed threshold") {
    Rng rng(88);
    const std::size_t n = 50;
    std::vector<float> s(n);
    std::vector<std::uint8_t> l(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<float>(rng.uniform());
        l[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    l[0] = 1;
    const double best = eval::ceil_dice(s, l).first;
    for (const float thr : {0.1f, 0.3f, 0.5f, 0.7f, 0.9f}) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool pred = s[i] >= thr;
            if (pred && l[i]) tp += 1;
            if (pred && !l[i]) fp += 1;
            if (!pred && l[i]) fn += 1;
        }
        const double dice = 2 * tp / (2 * tp + fp + fn);
        CHECK(best >= dice - 1e-12);
    }
}

TEST_CASE("evaluate_run pools pixels across images") {
    SUBCASE("single image, map equals mask") {
        Tensor map({4, 4}, 0.0f);
        Tensor mask({4, 4}, 0.0f);
        map[3] = 1.0f;
        mask[3] = 1.0f;
        const auto r = eval::evaluate_run({map}, {mask});
        CHECK(r.auprc == doctest::Approx(1.0));
        CHECK(r.ceil_dice == doctest::Approx(1.0));
        CHECK(r.n_pixels == 16);
        CHECK(r.n_positive == 1);
    }
    SUBCASE("pooling matches flat concatenation, not per-image means") {
        // Image A: one positive scored 0.9. Image B: one positive scored 0.2
        // with a 0.5-scored negative. Pooled ordering interleaves them.
        Tensor ma({1, 2}), mb({1, 2});
        Tensor ga({1, 2}), gb({1, 2});
        ma[0] = 0.9f;
        ma[1] = 0.1f;
        ga[0] = 1.0f;
        ga[1] = 0.0f;
        mb[0] = 0.2f;
        mb[1] = 0.5f;
        gb[0] = 1.0f;
        gb[1] = 0.0f;
        const auto pooled = eval::evaluate_run({ma, mb}, {ga, gb});
        const std::vector<float> flat{0.9f, 0.1f, 0.2f, 0.5f};
        const std::vector<std::uint8_t> lab{1, 0, 1, 0};
        CHECK(pooled.auprc == doctest::Approx(eval::auprc(flat, lab)).epsilon(1e-12));
        const double mean_per_image =
            (eval::auprc({0.9f, 0.1f}, {1, 0}) + eval::auprc({0.2f, 0.5f}, {1, 0})) / 2.0;
        CHECK(pooled.auprc != doctest::Approx(mean_per_image));
    }
    SUBCASE("empty-mask-only test set errors") {
        Tensor map({2, 2}, 0.5f);
        Tensor mask({2, 2}, 0.0f);
        CHECK_THROWS_AS(eval::evaluate_run({map}, {mask}), std::invalid_argument);
    }
    SUBCASE("shape mismatch errors") {
        Tensor map({2, 2}, 0.5f);
        Tensor mask({2, 3}, 1.0f);
        CHECK_THROWS_AS(eval::evaluate_run({map}, {mask}), std::invalid_argument);
    }
}

}  // TEST_SUITE
