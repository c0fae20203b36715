#ifndef NAD_TRAIN_HPP
#define NAD_TRAIN_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nad/io.hpp"
#include "nad/noise.hpp"
#include "nad/schedule.hpp"
#include "nad/unet.hpp"

namespace nad::train {

struct OptimConfig {
    std::string kind = "adam";          // adam | adamw
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;          // decoupled (adamw only)
    std::string lr_schedule = "cosine"; // constant | cosine (annealed, restarts)
    std::size_t lr_period = 200;
};

struct TrainConfig {
    std::size_t iterations = 600;
    std::size_t batch_size = 8;
    OptimConfig optim;
    std::optional<double> ema_rate;     // per-iteration EMA of the weights
    std::uint64_t seed = 1;
    noise::NoiseSpec noise_spec;        // sigma here is the corruption magnitude
    std::string loss_mask = "foreground";  // foreground | all
};

/// A trained denoiser: the network plus optional EMA weights (aligned with
/// net->params() order) and the per-iteration loss curve.
struct TrainedDenoiser {
    nn::DenoiserConfig config;
    nn::Target target = nn::Target::image;
    std::unique_ptr<nn::UNet<float>> net;
    bool has_ema = false;
    std::vector<Tensor> ema;
    std::vector<std::pair<std::size_t, double>> loss_curve;
};

double lr_at(const OptimConfig& cfg, std::size_t iteration);

/// Adam / AdamW over a fixed parameter list; state is kept per parameter in
/// registration order so training is deterministic.
class Optimizer {
public:
    Optimizer(const OptimConfig& cfg, std::vector<nn::Param<float>*>& params);
    void step(std::size_t iteration);

private:
    OptimConfig cfg_;
    std::vector<nn::Param<float>*>* params_;
    std::vector<std::vector<float>> m_, v_;
    std::size_t t_ = 0;
};

/// Denoising-autoencoder training: fresh per-sample per-channel noise each
/// iteration, additive corruption at the configured magnitude, and a
/// foreground-masked mean squared reconstruction loss.
TrainedDenoiser train_dae(const io::DatasetManifest& manifest, const TrainConfig& cfg,
                          const nn::DenoiserConfig& arch);

/// Diffusion training: per-sample t ~ U{1..T}, variance-preserving corruption
/// with the configured noise family (coarse/simplex fields standardized to
/// unit variance), MSE between predicted and injected noise.
TrainedDenoiser train_ddpm(const io::DatasetManifest& manifest, const TrainConfig& cfg,
                           const nn::DenoiserConfig& arch, const diffusion::Schedule& schedule);

/// Copies the EMA weights into the live network (used before inference).
void apply_ema(TrainedDenoiser& d);

void save_checkpoint(const TrainedDenoiser& d, const std::string& dir);
TrainedDenoiser load_checkpoint(const std::string& dir);

void write_loss_csv(const std::vector<std::pair<std::size_t, double>>& curve,
                    const std::string& path);

/// Unit-magnitude noise field for training/inference corruption: Gaussian
/// kinds are generated with sigma 1; coarse and simplex fields are
/// standardized to unit pooled variance.
Tensor sample_unit_noise(const noise::NoiseSpec& spec, std::size_t channels,
                         const std::vector<std::size_t>& spatial, std::uint64_t seed);

/// Runs one image (C, spatial...) through the network.
Tensor forward_image(nn::UNet<float>& net, const Tensor& image,
                     std::optional<std::size_t> t = std::nullopt);

}  // namespace nad::train

#endif
