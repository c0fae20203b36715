#include "nad/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace nad::diffusion {

Schedule make_schedule(std::size_t T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("make_schedule: require 0 < beta_start <= beta_end < 1");
    Schedule s;
    s.T = T;
    s.betas.resize(T);
    if (T == 1) {
        s.betas[0] = beta_start;
    } else {
        const double step = (beta_end - beta_start) / static_cast<double>(T - 1);
        for (std::size_t i = 0; i < T; ++i) s.betas[i] = beta_start + step * static_cast<double>(i);
    }
    s.alpha_bars.resize(T + 1);
    s.alpha_bars[0] = 1.0;
    for (std::size_t t = 1; t <= T; ++t) s.alpha_bars[t] = s.alpha_bars[t - 1] * (1.0 - s.betas[t - 1]);
    return s;
}

Schedule make_rescaled_linear_schedule(std::size_t T) {
    const double scale = 1000.0 / static_cast<double>(T);
    return make_schedule(T, 1e-4 * scale, 0.02 * scale);
}

Tensor dae_corrupt(const Tensor& x, const Tensor& n, double sigma) {
    if (!x.same_shape(n)) throw std::invalid_argument("dae_corrupt: shape mismatch");
    Tensor out(x.dims());
    const auto s = static_cast<float>(sigma);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + s * n[i];
    return out;
}

Tensor ddpm_corrupt(const Tensor& x, const Tensor& n, std::size_t t, const Schedule& schedule) {
    if (!x.same_shape(n)) throw std::invalid_argument("ddpm_corrupt: shape mismatch");
    if (t < 1 || t > schedule.T) throw std::invalid_argument("ddpm_corrupt: t out of range");
    const auto a = static_cast<float>(std::sqrt(schedule.alpha_bar(t)));
    const auto b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar(t)));
    Tensor out(x.dims());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * n[i];
    return out;
}

}  // namespace nad::diffusion
