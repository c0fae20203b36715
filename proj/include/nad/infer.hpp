#ifndef NAD_INFER_HPP
#define NAD_INFER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nad/noise.hpp"
#include "nad/schedule.hpp"
#include "nad/tensor.hpp"
#include "nad/unet.hpp"

namespace nad::infer {

/// Per-pixel anomaly scores (spatial shape, non-negative) plus provenance.
struct AnomalyMap {
    Tensor scores;
    std::string method;
};

/// B = 1 where every channel of x is exactly 0. x is (C, spatial...),
/// result has the spatial shape.
Tensor background_mask(const Tensor& x);

/// Median filter with edge-replicated borders; k odd, >= 1; k=1 is identity.
Tensor median_filter(const Tensor& map, std::size_t k = 5);

/// The scoring formula shared by all reconstruction methods:
/// masked median-filtered channel-mean absolute residual. The mask is
/// applied on both sides of the filter so background stays exactly 0.
Tensor score_from_reconstruction(const Tensor& x, const Tensor& xhat, std::size_t median_k = 5);

/// Predicted clean image / predicted noise at timestep t.
using DenoiseFn = std::function<Tensor(const Tensor& x, std::size_t t)>;
/// Reverse-process noise for the step towards t-1 (called only for t > 1).
using NoiseSampler = std::function<Tensor(std::size_t t)>;

DenoiseFn make_denoise_fn(nn::UNet<float>& net);

/// DAE anomaly scoring: reconstruct without any corruption and score the
/// residual.
AnomalyMap dae_score(nn::UNet<float>& net, const Tensor& x);

/// One reverse-diffusion update x_t -> x_{t-1}: subtract the scaled noise
/// prediction, rescale, and for t > 1 add sqrt(beta_t) * z.
Tensor ancestral_step(const DenoiseFn& eps, const Tensor& x_t, std::size_t t,
                      const diffusion::Schedule& schedule, const NoiseSampler& z);

struct ReconstructResult {
    Tensor reconstruction;
    AnomalyMap map;
};

/// Corrupt to t0 = round(t0_frac * T), run the reverse chain to 0, average
/// over `runs` repetitions with fresh noise. Both the corruption and the
/// per-step reverse noise come from `family` (standardized to unit
/// variance); t0_frac = 0 short-circuits to the identity pipeline.
ReconstructResult anoddpm_reconstruct(const DenoiseFn& eps, const Tensor& x,
                                      const diffusion::Schedule& schedule,
                                      const noise::NoiseSpec& family, std::uint64_t seed,
                                      double t0_frac = 0.25, std::size_t runs = 5);

struct KlInpaintResult {
    AnomalyMap kl_map;
    AnomalyMap final_map;
    bool roi_empty = false;  // degenerate (constant) kl_map: final_map is 0
};

/// Noise-prediction-error heatmap averaged over t_count timesteps in
/// [0.4T, 0.6T], binarized at its 97.5th foreground percentile into an ROI,
/// then RePaint-style inpainting of the ROI from 0.5T with the final map
/// scored against the inpainted image. run_inpaint=false skips the
/// (expensive) second stage and leaves final_map empty.
KlInpaintResult kl_inpaint_score(const DenoiseFn& eps, const Tensor& x,
                                 const diffusion::Schedule& schedule,
                                 const noise::NoiseSpec& family, std::uint64_t seed,
                                 bool run_inpaint = true, std::size_t t_count = 5);

/// Histogram equalization of the designated channel's foreground to (0, 1],
/// background zeroed, then median filtering.
AnomalyMap threshold_baseline(const Tensor& x, std::size_t channel = 0);

/// Marks the ceil(top_fraction * N_eligible) highest-valued eligible pixels
/// (ties broken by value then by index). Returns an empty set when the map
/// is constant over the eligible pixels.
std::vector<std::uint8_t> percentile_roi(const Tensor& map, const Tensor& eligible,
                                         double top_fraction);

}  // namespace nad::infer

#endif
