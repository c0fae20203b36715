#include "nad/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace nad::train {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::size_t> spatial_of(const io::DatasetManifest& m) { return m.spatial_dims; }

void require_healthy(const io::DatasetManifest& m) {
    if (m.items.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& it : m.items)
        if (it.mask_path && m.split != "train")
            throw std::invalid_argument("train: expected a healthy (mask-free) training split");
}

/// Per-pixel foreground indicator (1 - background) of a clean (C,spatial) image.
std::vector<float> foreground_of(const Tensor& img) {
    std::size_t plane = 1;
    for (std::size_t d = 1; d < img.ndim(); ++d) plane *= img.dim(d);
    const std::size_t C = img.dim(0);
    std::vector<float> fg(plane, 0.0f);
    for (std::size_t i = 0; i < plane; ++i) {
        bool all_zero = true;
        for (std::size_t c = 0; c < C && all_zero; ++c) all_zero = img[c * plane + i] == 0.0f;
        fg[i] = all_zero ? 0.0f : 1.0f;
    }
    return fg;
}

struct LossResult {
    double value = 0.0;
    NDArray<float> grad;
};

/// Mean squared error over masked entries; grad has d(mean sq err)/d pred.
/// mask is per-(sample, pixel), broadcast over channels; empty mask = all.
LossResult masked_mse(const NDArray<float>& pred, const NDArray<float>& target,
                      const std::vector<std::vector<float>>* masks) {
    LossResult r;
    r.grad = NDArray<float>(pred.dims(), 0.0f);
    const std::size_t N = pred.dim(0), C = pred.dim(1);
    std::size_t plane = 1;
    for (std::size_t d = 2; d < pred.ndim(); ++d) plane *= pred.dim(d);
    double denom = 0.0;
    if (masks) {
        for (std::size_t n = 0; n < N; ++n) {
            double cnt = 0.0;
            for (float v : (*masks)[n]) cnt += v;
            denom += cnt * static_cast<double>(C);
        }
    } else {
        denom = static_cast<double>(pred.size());
    }
    if (denom <= 0.0) denom = 1.0;
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const float m = masks ? (*masks)[n][i] : 1.0f;
                if (m == 0.0f) continue;
                const double diff = static_cast<double>(pred[base + i]) - target[base + i];
                acc += diff * diff;
                r.grad[base + i] = static_cast<float>(2.0 * diff / denom);
            }
        }
    r.value = acc / denom;
    return r;
}

NDArray<float> make_batch(const std::vector<Tensor>& images,
                              const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> dims;
    dims.push_back(idx.size());
    for (auto d : images[0].dims()) dims.push_back(d);
    NDArray<float> out(dims);
    const std::size_t item = images[0].size();
    for (std::size_t b = 0; b < idx.size(); ++b)
        std::copy(images[idx[b]].data(), images[idx[b]].data() + item, out.data() + b * item);
    return out;
}

}  // namespace

double lr_at(const OptimConfig& cfg, std::size_t iteration) {
    if (cfg.lr_schedule == "constant") return cfg.lr;
    if (cfg.lr_schedule == "cosine") {
        const std::size_t p = cfg.lr_period == 0 ? 1 : cfg.lr_period;
        const double phase = static_cast<double>(iteration % p) / static_cast<double>(p);
        return cfg.lr * 0.5 * (1.0 + std::cos(kPi * phase));
    }
    throw std::invalid_argument("unknown lr schedule: " + cfg.lr_schedule);
}

Optimizer::Optimizer(const OptimConfig& cfg, std::vector<nn::Param<float>*>& params)
    : cfg_(cfg), params_(&params) {
    if (cfg.kind != "adam" && cfg.kind != "adamw")
        throw std::invalid_argument("unknown optimizer: " + cfg.kind);
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i]->value.size(), 0.0f);
        v_[i].assign(params[i]->value.size(), 0.0f);
    }
}

void Optimizer::step(std::size_t iteration) {
    const double lr = lr_at(cfg_, iteration);
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
        auto& p = *(*params_)[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = static_cast<float>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g);
            v[j] = static_cast<float>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            double upd = lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            if (cfg_.kind == "adamw" && cfg_.weight_decay > 0.0)
                upd += lr * cfg_.weight_decay * p.value[j];
            p.value[j] = static_cast<float>(p.value[j] - upd);
        }
    }
}

Tensor sample_unit_noise(const noise::NoiseSpec& spec, std::size_t channels,
                         const std::vector<std::size_t>& spatial, std::uint64_t seed) {
    noise::NoiseSpec unit = spec;
    unit.sigma = 1.0;
    Tensor field = noise::generate_channels(unit, channels, spatial, seed);
    if (spec.kind != noise::Kind::pixelwise) field = noise::standardized(std::move(field));
    return field;
}

namespace {

struct Emas {
    bool enabled = false;
    double rate = 0.0;
    std::vector<Tensor> values;

    void start(const TrainConfig& cfg, std::vector<nn::Param<float>*>& params) {
        enabled = cfg.ema_rate.has_value();
        if (!enabled) return;
        rate = *cfg.ema_rate;
        values.clear();
        for (auto* p : params) values.emplace_back(p->value.dims(), 0.0f);
        update(params, 0.0);  // initialize to the initial weights
    }

    void update(std::vector<nn::Param<float>*>& params, double r) {
        if (!enabled) return;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& w = params[i]->value;
            auto& e = values[i];
            for (std::size_t j = 0; j < e.size(); ++j)
                e[j] = static_cast<float>(r * e[j] + (1.0 - r) * w[j]);
        }
    }
};

TrainedDenoiser train_loop(const io::DatasetManifest& manifest, const TrainConfig& cfg,
                           const nn::DenoiserConfig& arch, nn::Target target,
                           const diffusion::Schedule* schedule) {
    require_healthy(manifest);
    const std::vector<Tensor> images = io::load_images(manifest);
    const auto spatial = spatial_of(manifest);
    const std::size_t C = manifest.channels;

    const bool mask_fg = cfg.loss_mask == "foreground";
    if (!mask_fg && cfg.loss_mask != "all")
        throw std::invalid_argument("train: loss_mask must be 'foreground' or 'all'");
    std::vector<std::vector<float>> fg_all;
    if (mask_fg) {
        fg_all.reserve(images.size());
        for (const auto& im : images) fg_all.push_back(foreground_of(im));
    }

    TrainedDenoiser out;
    out.config = arch;
    out.target = target;
    out.net = std::make_unique<nn::UNet<float>>(arch);
    out.net->init(derive_seed(cfg.seed, {0}));
    auto& params = out.net->params();

    Optimizer optim(cfg.optim, params);
    Emas ema;
    ema.start(cfg, params);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        Rng batch_rng(derive_seed(cfg.seed, {1, it}));
        std::vector<std::size_t> idx(cfg.batch_size);
        for (auto& i : idx) i = batch_rng.uniform_int(images.size());

        NDArray<float> clean = make_batch(images, idx);
        NDArray<float> corrupted(clean.dims());
        NDArray<float> target_batch(clean.dims());
        std::vector<std::size_t> ts;
        const std::size_t item = images[0].size();

        if (target == nn::Target::image) {
            for (std::size_t b = 0; b < idx.size(); ++b) {
                const Tensor n =
                    sample_unit_noise(cfg.noise_spec, C, spatial, derive_seed(cfg.seed, {2, it, b}));
                const auto s = static_cast<float>(cfg.noise_spec.sigma);
                for (std::size_t j = 0; j < item; ++j)
                    corrupted[b * item + j] = clean[b * item + j] + s * n[j];
            }
            target_batch = clean;
        } else {
            ts.resize(idx.size());
            for (std::size_t b = 0; b < idx.size(); ++b) {
                Rng trng(derive_seed(cfg.seed, {3, it, b}));
                ts[b] = 1 + trng.uniform_int(schedule->T);
                const Tensor n =
                    sample_unit_noise(cfg.noise_spec, C, spatial, derive_seed(cfg.seed, {2, it, b}));
                const auto a = static_cast<float>(std::sqrt(schedule->alpha_bar(ts[b])));
                const auto bcoef = static_cast<float>(std::sqrt(1.0 - schedule->alpha_bar(ts[b])));
                for (std::size_t j = 0; j < item; ++j) {
                    corrupted[b * item + j] = a * clean[b * item + j] + bcoef * n[j];
                    target_batch[b * item + j] = n[j];
                }
            }
        }

        NDArray<float> pred =
            out.net->forward(corrupted, target == nn::Target::noise ? &ts : nullptr);

        std::vector<std::vector<float>> batch_masks;
        if (mask_fg) {
            batch_masks.reserve(idx.size());
            for (auto i : idx) batch_masks.push_back(fg_all[i]);
        }
        LossResult loss = masked_mse(pred, target_batch, mask_fg ? &batch_masks : nullptr);
        if (!std::isfinite(loss.value))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it) +
                                     " (lr=" + std::to_string(lr_at(cfg.optim, it)) + ")");
        out.loss_curve.emplace_back(it, loss.value);

        out.net->backward(loss.grad);
        optim.step(it);
        ema.update(params, ema.rate);
    }

    out.has_ema = ema.enabled;
    out.ema = std::move(ema.values);
    return out;
}

}  // namespace

TrainedDenoiser train_dae(const io::DatasetManifest& manifest, const TrainConfig& cfg,
                          const nn::DenoiserConfig& arch) {
    if (arch.time_conditioned)
        throw std::invalid_argument("train_dae: config must not be time-conditioned");
    return train_loop(manifest, cfg, arch, nn::Target::image, nullptr);
}

TrainedDenoiser train_ddpm(const io::DatasetManifest& manifest, const TrainConfig& cfg,
                           const nn::DenoiserConfig& arch, const diffusion::Schedule& schedule) {
    if (!arch.time_conditioned)
        throw std::invalid_argument("train_ddpm: config must be time-conditioned");
    return train_loop(manifest, cfg, arch, nn::Target::noise, &schedule);
}

void apply_ema(TrainedDenoiser& d) {
    if (!d.has_ema) return;
    auto& params = d.net->params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = d.ema[i];
}

void save_checkpoint(const TrainedDenoiser& d, const std::string& dir) {
    fs::create_directories(dir);
    auto& params = const_cast<TrainedDenoiser&>(d).net->params();
    json j;
    j["target"] = d.target == nn::Target::image ? "image" : "noise";
    j["has_ema"] = d.has_ema;
    json jc;
    jc["spatial_rank"] = d.config.spatial_rank;
    jc["in_channels"] = d.config.in_channels;
    jc["stage_channels"] = d.config.stage_channels;
    jc["gn_groups"] = d.config.gn_groups;
    jc["time_conditioned"] = d.config.time_conditioned;
    jc["time_embed_dim"] = d.config.time_embed_dim;
    jc["weight_standardization"] = d.config.weight_standardization;
    jc["residual_blocks"] = d.config.residual_blocks;
    j["config"] = jc;
    j["params"] = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        j["params"].push_back({{"name", params[i]->name}, {"dims", params[i]->value.dims()}});
        char buf[32];
        std::snprintf(buf, sizeof(buf), "p%04zu.nt", i);
        io::write_tensor(params[i]->value, dir + "/" + buf);
        if (d.has_ema) {
            std::snprintf(buf, sizeof(buf), "e%04zu.nt", i);
            io::write_tensor(d.ema[i], dir + "/" + buf);
        }
    }
    std::ofstream os(dir + "/checkpoint.json", std::ios::trunc);
    os << j.dump(2) << "\n";
}

TrainedDenoiser load_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/checkpoint.json");
    if (!is) throw io::FormatError("load_checkpoint: cannot open " + dir + "/checkpoint.json");
    json j;
    is >> j;
    TrainedDenoiser d;
    const auto& jc = j.at("config");
    d.config.spatial_rank = jc.at("spatial_rank").get<int>();
    d.config.in_channels = jc.at("in_channels").get<std::size_t>();
    d.config.stage_channels = jc.at("stage_channels").get<std::vector<std::size_t>>();
    d.config.gn_groups = jc.at("gn_groups").get<std::size_t>();
    d.config.time_conditioned = jc.at("time_conditioned").get<bool>();
    d.config.time_embed_dim = jc.at("time_embed_dim").get<std::size_t>();
    d.config.weight_standardization = jc.at("weight_standardization").get<bool>();
    d.config.residual_blocks = jc.at("residual_blocks").get<bool>();
    d.target = j.at("target").get<std::string>() == "image" ? nn::Target::image : nn::Target::noise;
    d.has_ema = j.at("has_ema").get<bool>();
    d.net = std::make_unique<nn::UNet<float>>(d.config);
    auto& params = d.net->params();
    if (params.size() != j.at("params").size())
        throw io::FormatError("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string name = j.at("params")[i].at("name").get<std::string>();
        if (name != params[i]->name)
            throw io::FormatError("load_checkpoint: parameter order mismatch at " + name);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "p%04zu.nt", i);
        Tensor t = io::read_tensor(dir + "/" + buf);
        if (t.dims() != params[i]->value.dims())
            throw io::FormatError("load_checkpoint: shape mismatch for " + name);
        params[i]->value = std::move(t);
        if (d.has_ema) {
            std::snprintf(buf, sizeof(buf), "e%04zu.nt", i);
            d.ema.push_back(io::read_tensor(dir + "/" + buf));
        }
    }
    return d;
}

void write_loss_csv(const std::vector<std::pair<std::size_t, double>>& curve,
                    const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    os << "iteration,loss\n";
    char buf[64];
    for (const auto& [it, loss] : curve) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", it, loss);
        os << buf;
    }
}

Tensor forward_image(nn::UNet<float>& net, const Tensor& image, std::optional<std::size_t> t) {
    std::vector<std::size_t> dims;
    dims.push_back(1);
    for (auto d : image.dims()) dims.push_back(d);
    NDArray<float> batch(dims);
    std::copy(image.data(), image.data() + image.size(), batch.data());
    std::vector<std::size_t> ts;
    NDArray<float> out_b;
    if (t) {
        ts.push_back(*t);
        out_b = net.forward(batch, &ts);
    } else {
        out_b = net.forward(batch);
    }
    Tensor out(image.dims());
    std::copy(out_b.data(), out_b.data() + out.size(), out.data());
    return out;
}

}  // namespace nad::train
