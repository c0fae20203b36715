#ifndef NAD_EXPERIMENT_HPP
#define NAD_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nad/metrics.hpp"
#include "nad/noise.hpp"
#include "nad/synth.hpp"
#include "nad/train.hpp"

namespace nad::exp {

struct ScheduleConfig {
    std::size_t T = 200;
    // 0 selects the rescaled linear defaults (1e-4..0.02 at T=1000).
    double beta_start = 0.0, beta_end = 0.0;
};

struct TrainParams {
    std::size_t iterations = 700;
    std::size_t batch_size = 4;
    double lr = 1e-3;
    std::string optimizer = "adam";
    double weight_decay = 0.0;
    std::string lr_schedule = "cosine";
    std::size_t lr_period = 200;
    std::optional<double> ema_rate;
    std::vector<std::size_t> stage_channels = {16, 32, 64};
    std::size_t gn_groups = 8;
    std::size_t time_embed_dim = 64;
    bool weight_standardization = true;
    std::string loss_mask = "foreground";
};

struct InferenceParams {
    double t0_frac = 0.25;   // reconstruction start, fraction of T
    std::size_t runs = 5;    // reconstruction repetitions to average
    std::size_t kl_t_count = 5;
};

struct GridSpec {
    std::vector<noise::Kind> kinds = {noise::Kind::coarse};
    std::vector<std::size_t> alphas = {8};
    std::vector<double> sigmas = {0.2};
    noise::SimplexParams simplex;
};

struct AblateSpec {
    std::vector<std::size_t> alpha_grid = {1, 2, 4, 8, 16, 32, 64};
    std::vector<double> sigma_grid = {0.05, 0.1, 0.2, 0.4, 0.8};
    std::size_t fixed_alpha = 8;  // image/8 at 64x64
    double fixed_sigma = 0.2;
};

struct SizeSweepSpec {
    std::vector<std::size_t> alpha_grid = {1, 2, 4, 8, 16, 32, 64};
    std::size_t bins = 5;  // equal-width diameter bins over the anomaly range
    double sigma = 0.2;
};

struct ExperimentConfig {
    std::string method = "dae";  // dae | diffusion_reconstruction | diffusion_kl_inpaint |
                                 // diffusion_kl_only | threshold
    synth::DatasetConfig dataset;
    GridSpec grid;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    ScheduleConfig schedule;
    TrainParams train;
    InferenceParams inference;
};

ExperimentConfig load_experiment_config(const std::string& path);
/// Applies a dotted-path override like "train.iterations=100" on top of the
/// config file JSON before parsing.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides);

struct ResultRow {
    std::string method;
    std::string noise_kind;
    std::size_t alpha = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double auprc = 0.0, ceil_dice = 0.0, threshold = 0.0;
    std::size_t n_pixels = 0, n_positive = 0;
    std::string dataset_hash;
    std::string status = "ok";
};

/// One row per (kind, alpha, sigma, seed) grid point: build/reuse the
/// dataset, train (or reuse the cached run), score the test split, evaluate.
/// A failing grid point yields a row with status "failed: ..." and the run
/// continues. Outputs under out_dir are append-only; reruns with the same
/// config reuse cached results and produce byte-identical CSVs.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

struct SummaryRow {
    std::string method, noise_kind;
    std::size_t alpha = 0;
    double sigma = 0.0;
    double mean_auprc = 0.0, std_auprc = 0.0;
    std::size_t n_seeds = 0;
};

/// Coarseness sweep (alpha grid at fixed sigma) plus magnitude sweep (sigma
/// grid at fixed alpha); writes per-seed rows and a mean/std summary (the
/// ablation curve) under out_dir.
struct AblateResult {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;
};
AblateResult ablate_noise(const ExperimentConfig& cfg, const AblateSpec& spec,
                          const std::string& out_dir);

struct SizeBinRow {
    std::size_t alpha = 0;
    double bin_lo_mm = 0.0, bin_hi_mm = 0.0;
    std::uint64_t seed = 0;
    double auprc = 0.0;
    std::size_t n_images = 0;
};

/// AUPRC per (alpha, anomaly-diameter bin), pooling only the test images
/// whose injected diameter falls in the bin; reuses the per-alpha cached
/// runs. Also writes the per-bin best alpha table.
struct SizeSweepResult {
    std::vector<SizeBinRow> rows;
    std::vector<std::size_t> best_alpha_per_bin;  // by mean AUPRC over seeds
};
SizeSweepResult size_sweep(const ExperimentConfig& cfg, const SizeSweepSpec& spec,
                           const std::string& out_dir);

/// Renders the cached anomaly maps of a finished run as PGM heatmaps.
void export_heatmaps(const std::string& run_maps_dir, const std::string& out_dir,
                     std::optional<float> lo = std::nullopt, std::optional<float> hi = std::nullopt);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

}  // namespace nad::exp

#endif
