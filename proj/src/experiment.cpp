#include "nad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "nad/infer.hpp"
#include "nad/schedule.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nad::exp {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string hash8(const std::string& s) {
    const std::uint64_t h = io::fnv1a64(s.data(), s.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
    return buf;
}

bool is_diffusion(const std::string& method) { return method.rfind("diffusion", 0) == 0; }

json dataset_json(const synth::DatasetConfig& d) {
    json j;
    j["name"] = d.name;
    j["train"] = d.train;
    j["val"] = d.val;
    j["test"] = d.test;
    j["shape"] = d.phantom.shape;
    j["channels"] = d.phantom.channels;
    j["intensity_range"] = d.phantom.intensity_range;
    j["texture_amp"] = {d.phantom.texture_amp_min, d.phantom.texture_amp_max};
    j["texture_wavelength"] = {d.phantom.texture_wavelength_min, d.phantom.texture_wavelength_max};
    j["seed"] = d.phantom.seed;
    j["diameter_mm"] = {d.anomaly.diameter_min_mm, d.anomaly.diameter_max_mm};
    j["mm_per_pixel"] = d.anomaly.mm_per_pixel;
    j["intensity_factor"] = d.anomaly.intensity_factor;
    j["anomaly_seed"] = d.anomaly.seed;
    return j;
}

json train_json(const TrainParams& t, const ScheduleConfig& s, bool diffusion) {
    json j;
    j["iterations"] = t.iterations;
    j["batch_size"] = t.batch_size;
    j["lr"] = t.lr;
    j["optimizer"] = t.optimizer;
    j["weight_decay"] = t.weight_decay;
    j["lr_schedule"] = t.lr_schedule;
    j["lr_period"] = t.lr_period;
    if (t.ema_rate) j["ema_rate"] = *t.ema_rate;
    j["stage_channels"] = t.stage_channels;
    j["gn_groups"] = t.gn_groups;
    j["time_embed_dim"] = t.time_embed_dim;
    j["weight_standardization"] = t.weight_standardization;
    j["loss_mask"] = t.loss_mask;
    if (diffusion) {
        j["T"] = s.T;
        j["beta_start"] = s.beta_start;
        j["beta_end"] = s.beta_end;
    }
    return j;
}

diffusion::Schedule build_schedule(const ScheduleConfig& s) {
    if (s.beta_start > 0.0) return diffusion::make_schedule(s.T, s.beta_start, s.beta_end);
    return diffusion::make_rescaled_linear_schedule(s.T);
}

struct DatasetHandle {
    synth::DatasetPaths paths;
    io::DatasetManifest train, test;
    std::string hash;
    std::vector<Tensor> test_images, test_masks;
    std::vector<double> test_diameters;
};

DatasetHandle prepare_dataset(const ExperimentConfig& cfg, const std::string& out_dir) {
    synth::DatasetConfig d = cfg.dataset;
    d.phantom.intensity_range = is_diffusion(cfg.method) ? "symmetric" : "unit";
    const std::string key =
        d.name + "_" + d.phantom.intensity_range + "_" + hash8(dataset_json(d).dump());
    const std::string dir = out_dir + "/data/" + key;

    DatasetHandle h;
    if (fs::exists(dir + "/test.json")) {
        h.paths = {dir, dir + "/train.json", dir + "/val.json", dir + "/test.json"};
    } else {
        h.paths = synth::build_dataset(d, dir);
    }
    h.train = io::load_manifest(h.paths.train_manifest);
    h.test = io::load_manifest(h.paths.test_manifest);
    h.hash = io::dataset_hash(h.test, h.paths.test_manifest);
    h.test_images = io::load_images(h.test);
    h.test_masks = io::load_masks(h.test);
    for (const auto& item : h.test.items) {
        const auto it = item.metadata.find("diameter_mm");
        h.test_diameters.push_back(it == item.metadata.end() ? 0.0 : std::stod(it->second));
    }
    return h;
}

nn::DenoiserConfig arch_of(const ExperimentConfig& cfg, const DatasetHandle& data) {
    nn::DenoiserConfig a;
    a.spatial_rank = static_cast<int>(data.train.spatial_dims.size());
    a.in_channels = data.train.channels;
    a.stage_channels = cfg.train.stage_channels;
    a.gn_groups = cfg.train.gn_groups;
    a.time_embed_dim = cfg.train.time_embed_dim;
    a.weight_standardization = cfg.train.weight_standardization;
    if (is_diffusion(cfg.method)) {
        a.time_conditioned = true;
        a.residual_blocks = true;
        a.weight_standardization = false;
    }
    return a;
}

noise::NoiseSpec noise_spec_of(const ExperimentConfig& cfg, noise::Kind kind, std::size_t alpha,
                               double sigma) {
    noise::NoiseSpec s;
    s.kind = kind;
    s.alpha = alpha;
    s.sigma = sigma;
    s.simplex = cfg.grid.simplex;
    return s;
}

std::string point_key(const std::string& prefix, noise::Kind kind, std::size_t alpha, double sigma,
                      std::uint64_t seed, const std::string& h) {
    return prefix + "_" + noise::to_string(kind) + "_a" + std::to_string(alpha) + "_s" +
           fmt6(sigma) + "_seed" + std::to_string(seed) + "_" + h;
}

/// Trains (or loads the cached) model for one grid point.
train::TrainedDenoiser obtain_model(const ExperimentConfig& cfg, const DatasetHandle& data,
                                    noise::Kind kind, std::size_t alpha, double sigma,
                                    std::uint64_t seed, const std::string& out_dir) {
    const bool diff = is_diffusion(cfg.method);
    const json tj = train_json(cfg.train, cfg.schedule, diff);
    const std::string key = point_key(std::string("train_") + (diff ? "ddpm" : "dae"), kind, alpha,
                                      sigma, seed, hash8(tj.dump() + data.hash));
    const std::string dir = out_dir + "/runs/" + key;

    if (fs::exists(dir + "/checkpoint/checkpoint.json")) {
        auto model = train::load_checkpoint(dir + "/checkpoint");
        if (model.has_ema) train::apply_ema(model);
        return model;
    }

    train::TrainConfig tc;
    tc.iterations = cfg.train.iterations;
    tc.batch_size = cfg.train.batch_size;
    tc.optim.kind = cfg.train.optimizer;
    tc.optim.lr = cfg.train.lr;
    tc.optim.weight_decay = cfg.train.weight_decay;
    tc.optim.lr_schedule = cfg.train.lr_schedule;
    tc.optim.lr_period = cfg.train.lr_period;
    tc.ema_rate = cfg.train.ema_rate;
    if (diff && !tc.ema_rate) tc.ema_rate = 0.999;
    tc.seed = seed;
    tc.noise_spec = noise_spec_of(cfg, kind, alpha, sigma);
    tc.loss_mask = cfg.train.loss_mask;

    const nn::DenoiserConfig arch = arch_of(cfg, data);
    train::TrainedDenoiser model;
    if (diff) {
        const auto schedule = build_schedule(cfg.schedule);
        model = train::train_ddpm(data.train, tc, arch, schedule);
    } else {
        model = train::train_dae(data.train, tc, arch);
    }
    fs::create_directories(dir);
    train::save_checkpoint(model, dir + "/checkpoint");
    train::write_loss_csv(model.loss_curve, dir + "/loss.csv");
    if (model.has_ema) train::apply_ema(model);
    return model;
}

std::vector<Tensor> compute_maps(const ExperimentConfig& cfg, const DatasetHandle& data,
                                 train::TrainedDenoiser* model, noise::Kind kind, std::size_t alpha,
                                 double sigma, std::uint64_t seed) {
    std::vector<Tensor> maps;
    maps.reserve(data.test_images.size());
    const noise::NoiseSpec family = noise_spec_of(cfg, kind, alpha, sigma);
    const auto schedule = is_diffusion(cfg.method) ? build_schedule(cfg.schedule)
                                                   : diffusion::Schedule{};
    for (std::size_t i = 0; i < data.test_images.size(); ++i) {
        const Tensor& x = data.test_images[i];
        const std::uint64_t sub = derive_seed(seed, {7, i});
        if (cfg.method == "dae") {
            maps.push_back(infer::dae_score(*model->net, x).scores);
        } else if (cfg.method == "threshold") {
            maps.push_back(infer::threshold_baseline(x).scores);
        } else if (cfg.method == "diffusion_reconstruction") {
            const auto eps = infer::make_denoise_fn(*model->net);
            maps.push_back(infer::anoddpm_reconstruct(eps, x, schedule, family, sub,
                                                      cfg.inference.t0_frac, cfg.inference.runs)
                               .map.scores);
        } else if (cfg.method == "diffusion_kl_only") {
            const auto eps = infer::make_denoise_fn(*model->net);
            maps.push_back(infer::kl_inpaint_score(eps, x, schedule, family, sub, false,
                                                   cfg.inference.kl_t_count)
                               .kl_map.scores);
        } else if (cfg.method == "diffusion_kl_inpaint") {
            const auto eps = infer::make_denoise_fn(*model->net);
            maps.push_back(infer::kl_inpaint_score(eps, x, schedule, family, sub, true,
                                                   cfg.inference.kl_t_count)
                               .final_map.scores);
        } else {
            throw std::invalid_argument("unknown method: " + cfg.method);
        }
    }
    return maps;
}

json row_json(const ResultRow& r) {
    json j;
    j["method"] = r.method;
    j["noise_kind"] = r.noise_kind;
    j["alpha"] = r.alpha;
    j["sigma"] = r.sigma;
    j["seed"] = r.seed;
    j["auprc"] = r.auprc;
    j["ceil_dice"] = r.ceil_dice;
    j["threshold"] = r.threshold;
    j["n_pixels"] = r.n_pixels;
    j["n_positive"] = r.n_positive;
    j["dataset_hash"] = r.dataset_hash;
    j["status"] = r.status;
    return j;
}

ResultRow row_from_json(const json& j) {
    ResultRow r;
    r.method = j.at("method").get<std::string>();
    r.noise_kind = j.at("noise_kind").get<std::string>();
    r.alpha = j.at("alpha").get<std::size_t>();
    r.sigma = j.at("sigma").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.auprc = j.at("auprc").get<double>();
    r.ceil_dice = j.at("ceil_dice").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.n_pixels = j.at("n_pixels").get<std::size_t>();
    r.n_positive = j.at("n_positive").get<std::size_t>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.status = j.at("status").get<std::string>();
    return r;
}

/// One grid point end to end, with map-level caching under out_dir/runs.
ResultRow run_point(const ExperimentConfig& cfg, const DatasetHandle& data, noise::Kind kind,
                    std::size_t alpha, double sigma, std::uint64_t seed,
                    const std::string& out_dir) {
    ResultRow row;
    row.method = cfg.method;
    row.noise_kind = cfg.method == "threshold" ? "none" : noise::to_string(kind);
    row.alpha = alpha;
    row.sigma = sigma;
    row.seed = seed;
    row.dataset_hash = data.hash;

    const json tj = train_json(cfg.train, cfg.schedule, is_diffusion(cfg.method));
    json ij;
    ij["t0_frac"] = cfg.inference.t0_frac;
    ij["runs"] = cfg.inference.runs;
    ij["kl_t_count"] = cfg.inference.kl_t_count;
    const std::string map_key = point_key(cfg.method, kind, alpha, sigma, seed,
                                          hash8(tj.dump() + ij.dump() + data.hash));
    const std::string map_dir = out_dir + "/runs/" + map_key;

    try {
        if (fs::exists(map_dir + "/result.json")) {
            std::ifstream is(map_dir + "/result.json");
            json j;
            is >> j;
            return row_from_json(j);
        }

        std::vector<Tensor> maps;
        if (cfg.method == "threshold") {
            maps = compute_maps(cfg, data, nullptr, kind, alpha, sigma, seed);
        } else {
            auto model = obtain_model(cfg, data, kind, alpha, sigma, seed, out_dir);
            maps = compute_maps(cfg, data, &model, kind, alpha, sigma, seed);
        }

        fs::create_directories(map_dir + "/maps");
        for (std::size_t i = 0; i < maps.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "map_%04zu.nt", i);
            io::write_tensor(maps[i], map_dir + "/maps/" + name);
        }

        const eval::EvalResult ev = eval::evaluate_run(maps, data.test_masks);
        row.auprc = ev.auprc;
        row.ceil_dice = ev.ceil_dice;
        row.threshold = ev.best_threshold;
        row.n_pixels = ev.n_pixels;
        row.n_positive = ev.n_positive;

        std::ofstream os(map_dir + "/result.json", std::ios::trunc);
        os << row_json(row).dump(2) << "\n";
    } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
    }
    return row;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    return load_experiment_config(path, {});
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open experiment config: " + path);
    json j;
    is >> j;

    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must look like key.path=value: " + ov);
        std::string ptr = "/" + ov.substr(0, eq);
        std::replace(ptr.begin(), ptr.end(), '.', '/');
        const std::string value = ov.substr(eq + 1);
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;  // bare strings allowed
        }
        j[json::json_pointer(ptr)] = parsed;
    }

    ExperimentConfig cfg;
    cfg.method = j.value("method", cfg.method);
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        cfg.dataset.name = d.value("name", cfg.dataset.name);
        cfg.dataset.train = d.value("train", cfg.dataset.train);
        cfg.dataset.val = d.value("val", cfg.dataset.val);
        cfg.dataset.test = d.value("test", cfg.dataset.test);
        if (d.contains("shape"))
            cfg.dataset.phantom.shape = d["shape"].get<std::vector<std::size_t>>();
        cfg.dataset.phantom.channels = d.value("channels", cfg.dataset.phantom.channels);
        cfg.dataset.phantom.seed = d.value("seed", cfg.dataset.phantom.seed);
        cfg.dataset.anomaly.diameter_min_mm =
            d.value("diameter_min_mm", cfg.dataset.anomaly.diameter_min_mm);
        cfg.dataset.anomaly.diameter_max_mm =
            d.value("diameter_max_mm", cfg.dataset.anomaly.diameter_max_mm);
        cfg.dataset.anomaly.mm_per_pixel = d.value("mm_per_pixel", cfg.dataset.anomaly.mm_per_pixel);
        cfg.dataset.anomaly.intensity_factor =
            d.value("intensity_factor", cfg.dataset.anomaly.intensity_factor);
        cfg.dataset.anomaly.seed = d.value("anomaly_seed", cfg.dataset.anomaly.seed);
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        if (n.contains("kind")) {
            cfg.grid.kinds.clear();
            for (const auto& k : n["kind"]) cfg.grid.kinds.push_back(noise::kind_from_string(k));
        }
        if (n.contains("alpha")) cfg.grid.alphas = n["alpha"].get<std::vector<std::size_t>>();
        if (n.contains("sigma")) cfg.grid.sigmas = n["sigma"].get<std::vector<double>>();
        if (n.contains("simplex")) {
            const auto& s = n["simplex"];
            cfg.grid.simplex.octaves = s.value("octaves", cfg.grid.simplex.octaves);
            cfg.grid.simplex.persistence = s.value("persistence", cfg.grid.simplex.persistence);
            cfg.grid.simplex.base_frequency =
                s.value("base_frequency", cfg.grid.simplex.base_frequency);
        }
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("schedule")) {
        cfg.schedule.T = j["schedule"].value("T", cfg.schedule.T);
        cfg.schedule.beta_start = j["schedule"].value("beta_start", cfg.schedule.beta_start);
        cfg.schedule.beta_end = j["schedule"].value("beta_end", cfg.schedule.beta_end);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.iterations = t.value("iterations", cfg.train.iterations);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.optimizer = t.value("optimizer", cfg.train.optimizer);
        cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
        cfg.train.lr_schedule = t.value("lr_schedule", cfg.train.lr_schedule);
        cfg.train.lr_period = t.value("lr_period", cfg.train.lr_period);
        if (t.contains("ema_rate")) cfg.train.ema_rate = t["ema_rate"].get<double>();
        if (t.contains("stage_channels"))
            cfg.train.stage_channels = t["stage_channels"].get<std::vector<std::size_t>>();
        cfg.train.gn_groups = t.value("gn_groups", cfg.train.gn_groups);
        cfg.train.time_embed_dim = t.value("time_embed_dim", cfg.train.time_embed_dim);
        cfg.train.weight_standardization =
            t.value("weight_standardization", cfg.train.weight_standardization);
        cfg.train.loss_mask = t.value("loss_mask", cfg.train.loss_mask);
    }
    if (j.contains("inference")) {
        const auto& i = j["inference"];
        cfg.inference.t0_frac = i.value("t0_frac", cfg.inference.t0_frac);
        cfg.inference.runs = i.value("runs", cfg.inference.runs);
        cfg.inference.kl_t_count = i.value("kl_t_count", cfg.inference.kl_t_count);
    }
    if (cfg.grid.kinds.empty() || cfg.grid.alphas.empty() || cfg.grid.sigmas.empty() ||
        cfg.seeds.empty())
        throw std::invalid_argument("experiment config: empty grid or seed list");
    return cfg;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir + "/runs");
    const DatasetHandle data = prepare_dataset(cfg, out_dir);
    std::vector<ResultRow> rows;
    for (const auto kind : cfg.grid.kinds)
        for (const auto alpha : cfg.grid.alphas)
            for (const auto sigma : cfg.grid.sigmas)
                for (const auto seed : cfg.seeds)
                    rows.push_back(run_point(cfg, data, kind, alpha, sigma, seed, out_dir));
    write_results_csv(rows, out_dir + "/results.csv");
    return rows;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "method,noise_kind,alpha,sigma,seed,auprc,ceil_dice,threshold,n_pixels,n_positive,"
          "dataset_hash,status\n";
    for (const auto& r : rows) {
        os << r.method << "," << r.noise_kind << "," << r.alpha << "," << fmt6(r.sigma) << ","
           << r.seed << "," << fmt(r.auprc) << "," << fmt(r.ceil_dice) << "," << fmt(r.threshold)
           << "," << r.n_pixels << "," << r.n_positive << "," << r.dataset_hash << ",\""
           << r.status << "\"\n";
    }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    std::map<std::string, SummaryRow> acc;
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        const std::string key =
            r.method + "|" + r.noise_kind + "|" + std::to_string(r.alpha) + "|" + fmt6(r.sigma);
        auto& s = acc[key];
        s.method = r.method;
        s.noise_kind = r.noise_kind;
        s.alpha = r.alpha;
        s.sigma = r.sigma;
        values[key].push_back(r.auprc);
    }
    std::vector<SummaryRow> out;
    for (auto& [key, s] : acc) {
        const auto& v = values[key];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        s.mean_auprc = mean;
        s.std_auprc = std::sqrt(var);
        s.n_seeds = v.size();
        out.push_back(s);
    }
    return out;
}

namespace {

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    os << "method,noise_kind,alpha,sigma,mean_auprc,std_auprc,n_seeds\n";
    for (const auto& s : rows)
        os << s.method << "," << s.noise_kind << "," << s.alpha << "," << fmt6(s.sigma) << ","
           << fmt(s.mean_auprc) << "," << fmt(s.std_auprc) << "," << s.n_seeds << "\n";
}

}  // namespace

AblateResult ablate_noise(const ExperimentConfig& cfg, const AblateSpec& spec,
                          const std::string& out_dir) {
    AblateResult res;
    // Coarseness sweep at fixed sigma.
    for (const auto alpha : spec.alpha_grid) {
        ExperimentConfig c = cfg;
        c.grid.kinds = {noise::Kind::coarse};
        c.grid.alphas = {alpha};
        c.grid.sigmas = {spec.fixed_sigma};
        const DatasetHandle data = prepare_dataset(c, out_dir);
        for (const auto seed : cfg.seeds)
            res.rows.push_back(
                run_point(c, data, noise::Kind::coarse, alpha, spec.fixed_sigma, seed, out_dir));
    }
    // Magnitude sweep at fixed alpha.
    for (const auto sigma : spec.sigma_grid) {
        if (sigma == spec.fixed_sigma) continue;  // already covered above
        ExperimentConfig c = cfg;
        c.grid.kinds = {noise::Kind::coarse};
        c.grid.alphas = {spec.fixed_alpha};
        c.grid.sigmas = {sigma};
        const DatasetHandle data = prepare_dataset(c, out_dir);
        for (const auto seed : cfg.seeds)
            res.rows.push_back(
                run_point(c, data, noise::Kind::coarse, spec.fixed_alpha, sigma, seed, out_dir));
    }
    res.summary = summarize(res.rows);
    write_results_csv(res.rows, out_dir + "/ablate_rows.csv");
    write_summary_csv(res.summary, out_dir + "/ablate_summary.csv");
    return res;
}

SizeSweepResult size_sweep(const ExperimentConfig& cfg, const SizeSweepSpec& spec,
                           const std::string& out_dir) {
    if (spec.bins < 1) throw std::invalid_argument("size_sweep: bins must be >= 1");
    SizeSweepResult res;
    const double lo = cfg.dataset.anomaly.diameter_min_mm;
    const double hi = cfg.dataset.anomaly.diameter_max_mm;
    const double width = (hi - lo) / static_cast<double>(spec.bins);

    ExperimentConfig c = cfg;
    c.grid.kinds = {noise::Kind::coarse};
    c.grid.sigmas = {spec.sigma};
    const DatasetHandle data = prepare_dataset(c, out_dir);

    // mean AUPRC per (alpha, bin) for the best-alpha table
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> bin_scores;

    for (const auto alpha : spec.alpha_grid) {
        c.grid.alphas = {alpha};
        for (const auto seed : cfg.seeds) {
            // Run (and cache) the full-test-set point, then re-pool per bin.
            const ResultRow full =
                run_point(c, data, noise::Kind::coarse, alpha, spec.sigma, seed, out_dir);
            if (full.status != "ok") continue;
            const json tj = train_json(c.train, c.schedule, is_diffusion(c.method));
            json ij;
            ij["t0_frac"] = c.inference.t0_frac;
            ij["runs"] = c.inference.runs;
            ij["kl_t_count"] = c.inference.kl_t_count;
            const std::string map_dir =
                out_dir + "/runs/" +
                point_key(c.method, noise::Kind::coarse, alpha, spec.sigma, seed,
                          hash8(tj.dump() + ij.dump() + data.hash));
            for (std::size_t b = 0; b < spec.bins; ++b) {
                const double b_lo = lo + width * static_cast<double>(b);
                const double b_hi = b + 1 == spec.bins ? hi : b_lo + width;
                std::vector<Tensor> maps, masks;
                for (std::size_t i = 0; i < data.test_images.size(); ++i) {
                    const double d = data.test_diameters[i];
                    const bool in_bin = d >= b_lo && (d < b_hi || (b + 1 == spec.bins && d <= b_hi));
                    if (!in_bin) continue;
                    char name[32];
                    std::snprintf(name, sizeof(name), "map_%04zu.nt", i);
                    maps.push_back(io::read_tensor(map_dir + "/maps/" + name));
                    masks.push_back(data.test_masks[i]);
                }
                SizeBinRow row;
                row.alpha = alpha;
                row.bin_lo_mm = b_lo;
                row.bin_hi_mm = b_hi;
                row.seed = seed;
                row.n_images = maps.size();
                if (!maps.empty()) {
                    row.auprc = eval::evaluate_run(maps, masks).auprc;
                    bin_scores[{alpha, b}].push_back(row.auprc);
                }
                res.rows.push_back(row);
            }
        }
    }

    res.best_alpha_per_bin.assign(spec.bins, 0);
    for (std::size_t b = 0; b < spec.bins; ++b) {
        double best = -1.0;
        for (const auto alpha : spec.alpha_grid) {
            const auto it = bin_scores.find({alpha, b});
            if (it == bin_scores.end() || it->second.empty()) continue;
            double mean = 0.0;
            for (double v : it->second) mean += v;
            mean /= static_cast<double>(it->second.size());
            if (mean > best) {
                best = mean;
                res.best_alpha_per_bin[b] = alpha;
            }
        }
    }

    std::ofstream os(out_dir + "/size_sweep.csv", std::ios::trunc);
    os << "alpha,bin_lo_mm,bin_hi_mm,seed,auprc,n_images\n";
    for (const auto& r : res.rows)
        os << r.alpha << "," << fmt6(r.bin_lo_mm) << "," << fmt6(r.bin_hi_mm) << "," << r.seed
           << "," << fmt(r.auprc) << "," << r.n_images << "\n";
    std::ofstream os2(out_dir + "/size_sweep_best_alpha.csv", std::ios::trunc);
    os2 << "bin_lo_mm,bin_hi_mm,best_alpha\n";
    for (std::size_t b = 0; b < spec.bins; ++b)
        os2 << fmt6(lo + width * static_cast<double>(b)) << ","
            << fmt6(b + 1 == spec.bins ? hi : lo + width * static_cast<double>(b + 1)) << ","
            << res.best_alpha_per_bin[b] << "\n";
    return res;
}

void export_heatmaps(const std::string& run_maps_dir, const std::string& out_dir,
                     std::optional<float> lo, std::optional<float> hi) {
    fs::create_directories(out_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run_maps_dir))
        if (e.path().extension() == ".nt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("export_heatmaps: no .nt maps in " + run_maps_dir);
    for (const auto& f : files) {
        const Tensor map = io::read_tensor(f.string());
        float mlo = lo.value_or(0.0f);
        float mhi;
        if (hi) {
            mhi = *hi;
        } else {
            mhi = map[0];
            for (std::size_t i = 1; i < map.size(); ++i) mhi = std::max(mhi, map[i]);
            if (mhi <= mlo) mhi = mlo + 1.0f;
        }
        io::write_pgm(map, (fs::path(out_dir) / f.stem()).string() + ".pgm", mlo, mhi);
    }
}

}  // namespace nad::exp
