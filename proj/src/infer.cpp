#include "nad/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nad/kernels.hpp"
#include "nad/rng.hpp"
#include "nad/train.hpp"

namespace nad::infer {

namespace {

std::vector<std::size_t> spatial_dims(const Tensor& x) {
    return {x.dims().begin() + 1, x.dims().end()};
}

std::size_t plane_size(const Tensor& x) {
    std::size_t p = 1;
    for (std::size_t d = 1; d < x.ndim(); ++d) p *= x.dim(d);
    return p;
}

Tensor channel_mean_absdiff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("score: shape mismatch");
    const std::size_t C = a.dim(0), plane = plane_size(a);
    Tensor out(spatial_dims(a), 0.0f);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) out[i] += std::fabs(a[c * plane + i] - b[c * plane + i]);
    const float inv = 1.0f / static_cast<float>(C);
    for (std::size_t i = 0; i < plane; ++i) out[i] *= inv;
    return out;
}

Tensor unit_noise(const noise::NoiseSpec& family, const Tensor& like, std::uint64_t seed) {
    return train::sample_unit_noise(family, like.dim(0), spatial_dims(like), seed);
}

}  // namespace

Tensor background_mask(const Tensor& x) {
    const std::size_t C = x.dim(0), plane = plane_size(x);
    Tensor mask(spatial_dims(x), 0.0f);
    for (std::size_t i = 0; i < plane; ++i) {
        bool all_zero = true;
        for (std::size_t c = 0; c < C && all_zero; ++c) all_zero = x[c * plane + i] == 0.0f;
        mask[i] = all_zero ? 1.0f : 0.0f;
    }
    return mask;
}

Tensor median_filter(const Tensor& map, std::size_t k) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("median_filter: k must be odd and >= 1");
    if (k == 1) return map;
    Tensor out(map.dims());
    if (map.ndim() == 2)
        kern::median_filter2d(map.data(), out.data(), static_cast<kern::i64>(map.dim(0)),
                              static_cast<kern::i64>(map.dim(1)), static_cast<kern::i64>(k));
    else if (map.ndim() == 3)
        kern::median_filter3d(map.data(), out.data(), static_cast<kern::i64>(map.dim(0)),
                              static_cast<kern::i64>(map.dim(1)), static_cast<kern::i64>(map.dim(2)),
                              static_cast<kern::i64>(k));
    else
        throw std::invalid_argument("median_filter: rank 2 or 3 only");
    return out;
}

Tensor score_from_reconstruction(const Tensor& x, const Tensor& xhat, std::size_t median_k) {
    const Tensor bg = background_mask(x);
    Tensor resid = channel_mean_absdiff(x, xhat);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] *= (1.0f - bg[i]);
    Tensor filtered = median_filter(resid, median_k);
    for (std::size_t i = 0; i < filtered.size(); ++i) filtered[i] *= (1.0f - bg[i]);
    return filtered;
}

DenoiseFn make_denoise_fn(nn::UNet<float>& net) {
    const bool timed = net.config().time_conditioned;
    return [&net, timed](const Tensor& x, std::size_t t) {
        return train::forward_image(net, x, timed ? std::optional<std::size_t>(t) : std::nullopt);
    };
}

AnomalyMap dae_score(nn::UNet<float>& net, const Tensor& x) {
    const Tensor xhat = train::forward_image(net, x);
    return {score_from_reconstruction(x, xhat), "dae"};
}

Tensor ancestral_step(const DenoiseFn& eps, const Tensor& x_t, std::size_t t,
                      const diffusion::Schedule& schedule, const NoiseSampler& z) {
    if (t < 1 || t > schedule.T) throw std::invalid_argument("ancestral_step: t out of range");
    const double beta = schedule.beta(t);
    const double ab = schedule.alpha_bar(t);
    const Tensor pred = eps(x_t, t);
    if (!pred.same_shape(x_t)) throw std::invalid_argument("ancestral_step: prediction shape mismatch");
    const auto c_eps = static_cast<float>(beta / std::sqrt(1.0 - ab));
    const auto inv_sqrt = static_cast<float>(1.0 / std::sqrt(1.0 - beta));
    Tensor out(x_t.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - c_eps * pred[i]) * inv_sqrt;
    if (t > 1 && z) {
        const Tensor noise = z(t);
        const auto sigma = static_cast<float>(std::sqrt(beta));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * noise[i];
    }
    return out;
}

ReconstructResult anoddpm_reconstruct(const DenoiseFn& eps, const Tensor& x,
                                      const diffusion::Schedule& schedule,
                                      const noise::NoiseSpec& family, std::uint64_t seed,
                                      double t0_frac, std::size_t runs) {
    const auto t0 = static_cast<std::size_t>(std::llround(t0_frac * static_cast<double>(schedule.T)));
    if (t0 > schedule.T) throw std::invalid_argument("anoddpm_reconstruct: t0 > T");
    if (runs < 1) throw std::invalid_argument("anoddpm_reconstruct: runs must be >= 1");
    if (t0 == 0) return {x, {Tensor(spatial_dims(x), 0.0f), "diffusion_reconstruction"}};

    Tensor sum(x.dims(), 0.0f);
    for (std::size_t r = 0; r < runs; ++r) {
        const Tensor n0 = unit_noise(family, x, derive_seed(seed, {r, 0}));
        Tensor xt = diffusion::ddpm_corrupt(x, n0, t0, schedule);
        NoiseSampler z = [&](std::size_t t) {
            return unit_noise(family, x, derive_seed(seed, {r, t}));
        };
        for (std::size_t t = t0; t >= 1; --t) xt = ancestral_step(eps, xt, t, schedule, z);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += xt[i];
    }
    const float inv = 1.0f / static_cast<float>(runs);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] *= inv;
    return {sum, {score_from_reconstruction(x, sum), "diffusion_reconstruction"}};
}

std::vector<std::uint8_t> percentile_roi(const Tensor& map, const Tensor& eligible,
                                         double top_fraction) {
    if (!map.same_shape(eligible)) throw std::invalid_argument("percentile_roi: shape mismatch");
    std::vector<std::size_t> idx;
    idx.reserve(map.size());
    for (std::size_t i = 0; i < map.size(); ++i)
        if (eligible[i] != 0.0f) idx.push_back(i);
    std::vector<std::uint8_t> roi(map.size(), 0);
    if (idx.empty()) return roi;
    float lo = map[idx[0]], hi = map[idx[0]];
    for (auto i : idx) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    if (lo == hi) return roi;  // degenerate percentile: empty ROI
    const auto k = static_cast<std::size_t>(
        std::ceil(top_fraction * static_cast<double>(idx.size())));
    if (k == 0) return roi;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (map[a] != map[b]) return map[a] > map[b];
        return a < b;
    });
    for (std::size_t j = 0; j < std::min(k, idx.size()); ++j) roi[idx[j]] = 1;
    return roi;
}

KlInpaintResult kl_inpaint_score(const DenoiseFn& eps, const Tensor& x,
                                 const diffusion::Schedule& schedule,
                                 const noise::NoiseSpec& family, std::uint64_t seed,
                                 bool run_inpaint, std::size_t t_count) {
    if (t_count < 1) throw std::invalid_argument("kl_inpaint_score: t_count must be >= 1");
    const Tensor bg = background_mask(x);
    const std::size_t plane = plane_size(x);
    const auto T = static_cast<double>(schedule.T);

    // Stage 1: noise-prediction error averaged over magnitudes in [0.4T, 0.6T].
    Tensor kl_raw(spatial_dims(x), 0.0f);
    for (std::size_t i = 0; i < t_count; ++i) {
        const double frac =
            t_count == 1 ? 0.5 : 0.4 + 0.2 * static_cast<double>(i) / static_cast<double>(t_count - 1);
        auto t = static_cast<std::size_t>(std::llround(frac * T));
        t = std::max<std::size_t>(1, std::min(t, schedule.T));
        const Tensor n = unit_noise(family, x, derive_seed(seed, {100, i}));
        const Tensor xt = diffusion::ddpm_corrupt(x, n, t, schedule);
        const Tensor pred = eps(xt, t);
        const Tensor diff = channel_mean_absdiff(pred, n);
        for (std::size_t j = 0; j < plane; ++j) kl_raw[j] += diff[j];
    }
    for (std::size_t j = 0; j < plane; ++j) kl_raw[j] *= (1.0f - bg[j]) / static_cast<float>(t_count);
    Tensor kl = median_filter(kl_raw, 5);
    for (std::size_t j = 0; j < plane; ++j) kl[j] *= (1.0f - bg[j]);

    KlInpaintResult res;
    res.kl_map = {kl, "diffusion_kl"};

    // ROI from the 97.5th percentile of the foreground heatmap.
    Tensor fg(bg.dims());
    for (std::size_t j = 0; j < plane; ++j) fg[j] = 1.0f - bg[j];
    const std::vector<std::uint8_t> roi = percentile_roi(kl, fg, 0.025);
    const bool empty = std::find(roi.begin(), roi.end(), std::uint8_t(1)) == roi.end();
    res.roi_empty = empty;

    if (!run_inpaint) return res;
    if (empty) {
        res.final_map = {Tensor(spatial_dims(x), 0.0f), "diffusion_kl_inpaint"};
        return res;
    }

    // Stage 2: RePaint-style inpainting of the ROI from 0.5T downwards; the
    // known region is re-imposed from the forward-noised original each step.
    const auto t_start = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.5 * T)));
    const std::size_t C = x.dim(0);
    Tensor xt = diffusion::ddpm_corrupt(x, unit_noise(family, x, derive_seed(seed, {200})), t_start,
                                        schedule);
    NoiseSampler z = [&](std::size_t t) { return unit_noise(family, x, derive_seed(seed, {201, t})); };
    for (std::size_t t = t_start; t >= 1; --t) {
        const Tensor x_unknown = ancestral_step(eps, xt, t, schedule, z);
        Tensor x_known(x.dims());
        if (t - 1 >= 1)
            x_known = diffusion::ddpm_corrupt(x, unit_noise(family, x, derive_seed(seed, {202, t})),
                                              t - 1, schedule);
        else
            x_known = x;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t j = 0; j < plane; ++j)
                xt[c * plane + j] = roi[j] ? x_unknown[c * plane + j] : x_known[c * plane + j];
    }
    res.final_map = {score_from_reconstruction(x, xt), "diffusion_kl_inpaint"};
    return res;
}

AnomalyMap threshold_baseline(const Tensor& x, std::size_t channel) {
    if (channel >= x.dim(0)) throw std::invalid_argument("threshold_baseline: bad channel");
    const Tensor bg = background_mask(x);
    const std::size_t plane = plane_size(x);
    std::vector<float> values;
    values.reserve(plane);
    for (std::size_t i = 0; i < plane; ++i)
        if (bg[i] == 0.0f) values.push_back(x[channel * plane + i]);
    if (values.empty()) throw std::invalid_argument("threshold_baseline: empty foreground");
    std::sort(values.begin(), values.end());

    // Empirical CDF: score(v) = #{u <= v} / N over the foreground.
    Tensor eq(spatial_dims(x), 0.0f);
    const auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < plane; ++i) {
        if (bg[i] != 0.0f) continue;
        const float v = x[channel * plane + i];
        const auto rank = std::upper_bound(values.begin(), values.end(), v) - values.begin();
        eq[i] = static_cast<float>(static_cast<double>(rank) / n);
    }
    Tensor filtered = median_filter(eq, 5);
    for (std::size_t i = 0; i < plane; ++i) filtered[i] *= (1.0f - bg[i]);
    return {filtered, "threshold"};
}

}  // namespace nad::infer
