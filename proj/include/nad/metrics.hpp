#ifndef NAD_METRICS_HPP
#define NAD_METRICS_HPP

#include <cstdint>
#include <vector>

#include "nad/tensor.hpp"

namespace nad::eval {

struct EvalResult {
    double auprc = 0.0;
    double ceil_dice = 0.0;
    double best_threshold = 0.0;
    std::size_t n_pixels = 0;
    std::size_t n_positive = 0;
};

/// Area under the precision-recall curve: scores sorted descending, ties
/// grouped, precision integrated over recall increments (step
/// interpolation). Requires at least one positive label.
double auprc(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels);

/// Best Dice over binarization thresholds (predict positive at score >=
/// threshold), candidates being the unique score values, capped at 1024
/// quantiles; returns the smallest maximizing threshold on ties.
std::pair<double, double> ceil_dice(const std::vector<float>& scores,
                                    const std::vector<std::uint8_t>& labels);

/// Pools all pixels of all images (flat concatenation, not per-image means)
/// and computes both metrics.
EvalResult evaluate_run(const std::vector<Tensor>& maps, const std::vector<Tensor>& masks);

}  // namespace nad::eval

#endif
