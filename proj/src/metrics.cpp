#include "nad/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace nad::eval {

namespace {

void check_inputs(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("metrics: scores/labels length mismatch");
    if (scores.empty()) throw std::invalid_argument("metrics: empty input");
    if (std::find(labels.begin(), labels.end(), std::uint8_t(1)) == labels.end())
        throw std::invalid_argument("metrics: no positive labels; metric undefined");
}

/// Indices sorted by score descending. Order within ties does not matter
/// for either metric (ties are processed as one group).
std::vector<std::size_t> sorted_by_score(const std::vector<float>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

double auprc(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
    check_inputs(scores, labels);
    const auto order = sorted_by_score(scores);
    const double total_pos = static_cast<double>(
        std::count(labels.begin(), labels.end(), std::uint8_t(1)));

    double area = 0.0;
    double tp = 0.0, fp = 0.0, prev_recall = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Consume one tie group: all entries sharing this score enter together.
        const float s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]]) tp += 1.0;
            else fp += 1.0;
            ++i;
        }
        const double recall = tp / total_pos;
        const double precision = tp / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

std::pair<double, double> ceil_dice(const std::vector<float>& scores,
                                    const std::vector<std::uint8_t>& labels) {
    check_inputs(scores, labels);
    const auto order = sorted_by_score(scores);
    const double total_pos = static_cast<double>(
        std::count(labels.begin(), labels.end(), std::uint8_t(1)));

    // Unique score values descending; cap the candidate set at 1024 quantiles.
    std::vector<float> uniq;
    uniq.reserve(order.size());
    for (auto idx : order)
        if (uniq.empty() || scores[idx] != uniq.back()) uniq.push_back(scores[idx]);
    std::vector<float> candidates;
    constexpr std::size_t kMaxCandidates = 1024;
    if (uniq.size() <= kMaxCandidates) {
        candidates = uniq;
    } else {
        candidates.reserve(kMaxCandidates);
        for (std::size_t q = 0; q < kMaxCandidates; ++q) {
            const std::size_t pos = (q * (uniq.size() - 1)) / (kMaxCandidates - 1);
            if (candidates.empty() || uniq[pos] != candidates.back())
                candidates.push_back(uniq[pos]);
        }
    }

    // Walk thresholds descending, extending predicted positives incrementally.
    double best_dice = -1.0;
    double best_thr = 0.0;
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    for (const float thr : candidates) {
        while (i < order.size() && scores[order[i]] >= thr) {
            if (labels[order[i]]) tp += 1.0;
            else fp += 1.0;
            ++i;
        }
        const double fn = total_pos - tp;
        const double dice = (2.0 * tp) / (2.0 * tp + fp + fn);
        if (dice > best_dice || (dice == best_dice && thr < best_thr)) {
            best_dice = dice;
            best_thr = thr;
        }
    }
    return {best_dice, best_thr};
}

EvalResult evaluate_run(const std::vector<Tensor>& maps, const std::vector<Tensor>& masks) {
    if (maps.size() != masks.size())
        throw std::invalid_argument("evaluate_run: maps/masks count mismatch");
    std::vector<float> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].same_shape(masks[i]))
            throw std::invalid_argument("evaluate_run: shape mismatch at image " + std::to_string(i));
        for (std::size_t j = 0; j < maps[i].size(); ++j) {
            scores.push_back(maps[i][j]);
            labels.push_back(masks[i][j] != 0.0f ? 1 : 0);
        }
    }
    EvalResult r;
    r.n_pixels = scores.size();
    r.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t(1)));
    r.auprc = auprc(scores, labels);
    const auto [dice, thr] = ceil_dice(scores, labels);
    r.ceil_dice = dice;
    r.best_threshold = thr;
    return r;
}

}  // namespace nad::eval
