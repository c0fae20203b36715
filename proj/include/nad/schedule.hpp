#ifndef NAD_SCHEDULE_HPP
#define NAD_SCHEDULE_HPP

#include <cstddef>
#include <vector>

#include "nad/tensor.hpp"

namespace nad::diffusion {

/// Variance-preserving corruption schedule. alpha_bars[t] is the retained
/// signal fraction after t steps: alpha_bars[0] = 1,
/// alpha_bars[t] = prod_{s<=t} (1 - betas[s-1]); strictly decreasing.
struct Schedule {
    std::size_t T = 0;
    std::vector<double> betas;       // length T, values in (0,1)
    std::vector<double> alpha_bars;  // length T+1

    double beta(std::size_t t) const { return betas.at(t - 1); }          // t in 1..T
    double alpha_bar(std::size_t t) const { return alpha_bars.at(t); }    // t in 0..T
};

/// Linear beta schedule from beta_start to beta_end over T steps.
Schedule make_schedule(std::size_t T, double beta_start, double beta_end);

/// Linear schedule with endpoints 1e-4 and 0.02 at T=1000, rescaled by
/// 1000/T for other T so that alpha_bars[T] stays near 0.
Schedule make_rescaled_linear_schedule(std::size_t T);

/// Additive corruption x + sigma * n. The convention throughout is that n
/// is generated with unit sigma and the magnitude is applied here.
Tensor dae_corrupt(const Tensor& x, const Tensor& n, double sigma);

/// Variance-preserving corruption sqrt(ab_t) * x + sqrt(1 - ab_t) * n
/// for t in 1..T.
Tensor ddpm_corrupt(const Tensor& x, const Tensor& n, std::size_t t, const Schedule& schedule);

}  // namespace nad::diffusion

#endif
