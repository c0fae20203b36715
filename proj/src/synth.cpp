#include "nad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "nad/rng.hpp"

namespace fs = std::filesystem;

namespace nad::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Ellipse {
    double cy, cx, ry, rx;
    bool contains(double y, double x) const {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        return dy * dy + dx * dx <= 1.0;
    }
};

struct Wave {
    double ky, kx, phase, amp;
    double eval(double y, double x) const { return amp * std::sin(ky * y + kx * x + phase); }
};

float map_range(double v, const std::string& range) {
    if (range == "unit") return static_cast<float>(v);
    if (range == "symmetric") return static_cast<float>(2.0 * v - 1.0);
    throw std::invalid_argument("phantom: intensity_range must be 'unit' or 'symmetric'");
}

double unmap_range(float v, const std::string& range) {
    if (range == "unit") return static_cast<double>(v);
    return (static_cast<double>(v) + 1.0) / 2.0;
}

}  // namespace

Tensor gen_phantom(const PhantomSpec& spec, std::size_t index) {
    const std::size_t rank = spec.shape.size();
    if (rank != 2 && rank != 3) throw std::invalid_argument("gen_phantom: shape must be 2D or 3D");
    for (auto d : spec.shape)
        if (d < 16) throw std::invalid_argument("gen_phantom: dims must be >= 16");
    map_range(0.5, spec.intensity_range);  // validates the range name

    const std::size_t H = spec.shape[rank - 2], W = spec.shape[rank - 1];
    const std::size_t D = rank == 3 ? spec.shape[0] : 1;
    Rng rng(derive_seed(spec.seed, {0, index}));

    // Head outline, a darker ventricle-like core, and a brighter patch.
    const Ellipse head{H * (0.5 + 0.03 * (rng.uniform() - 0.5)),
                       W * (0.5 + 0.03 * (rng.uniform() - 0.5)),
                       H * rng.uniform(0.36, 0.42), W * rng.uniform(0.30, 0.38)};
    const Ellipse core{head.cy + H * 0.06 * (rng.uniform() - 0.5),
                       head.cx + W * 0.06 * (rng.uniform() - 0.5),
                       H * rng.uniform(0.10, 0.15), W * rng.uniform(0.08, 0.13)};
    const Ellipse patch{head.cy + H * rng.uniform(-0.18, 0.18),
                        head.cx + W * rng.uniform(-0.18, 0.18),
                        H * rng.uniform(0.06, 0.10), W * rng.uniform(0.06, 0.10)};
    const double base = rng.uniform(0.50, 0.62);
    const double core_delta = -rng.uniform(0.18, 0.24);
    const double patch_delta = rng.uniform(0.06, 0.12);
    const double ez = rank == 3 ? D * 0.5 : 0.0;
    const double rz = rank == 3 ? D * rng.uniform(0.34, 0.42) : 1.0;

    std::vector<std::size_t> dims;
    dims.push_back(spec.channels);
    for (auto d : spec.shape) dims.push_back(d);
    Tensor out(dims, 0.0f);
    const std::size_t plane = D * H * W;

    for (std::size_t c = 0; c < spec.channels; ++c) {
        Rng crng(derive_seed(spec.seed, {1, index, c}));
        // Two low-frequency fold ("gyri") waves per channel.
        Wave waves[2];
        for (auto& w : waves) {
            const double lambda = crng.uniform(spec.texture_wavelength_min, spec.texture_wavelength_max);
            const double angle = crng.uniform(0.0, kTwoPi);
            w.ky = kTwoPi / lambda * std::sin(angle);
            w.kx = kTwoPi / lambda * std::cos(angle);
            w.phase = crng.uniform(0.0, kTwoPi);
            w.amp = crng.uniform(spec.texture_amp_min, spec.texture_amp_max);
        }
        const double cbase = base + 0.04 * (crng.uniform() - 0.5);
        for (std::size_t z = 0; z < D; ++z) {
            const double zres = rank == 3 ? ((z - ez) / rz) * ((z - ez) / rz) : 0.0;
            if (zres > 1.0) continue;
            // Shrink the in-plane outline towards the poles of the ellipsoid.
            const double shrink = std::sqrt(1.0 - zres);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double dy = (y - head.cy) / (head.ry * shrink);
                    const double dx = (x - head.cx) / (head.rx * shrink);
                    if (dy * dy + dx * dx > 1.0) continue;
                    double v = cbase;
                    if (core.contains(y, x)) v += core_delta;
                    if (patch.contains(y, x)) v += patch_delta;
                    for (const auto& w : waves) v += w.eval(y + 17.0 * z, x - 11.0 * z);
                    v = std::clamp(v, kForegroundMin, kForegroundMax);
                    out[(c * D + z) * H * W + y * W + x] = map_range(v, spec.intensity_range);
                }
        }
    }
    return out;
}

InjectResult inject_anomaly(const Tensor& image, const AnomalySpec& spec, std::size_t index,
                            const std::string& intensity_range) {
    const std::size_t rank = image.ndim() - 1;
    const std::size_t C = image.dim(0);
    const std::size_t H = image.dim(rank - 1), W = image.dim(rank);
    const std::size_t D = rank == 3 ? image.dim(1) : 1;
    const std::size_t plane = D * H * W;

    // Foreground = any channel nonzero.
    std::vector<std::uint8_t> fg(plane, 0);
    std::vector<std::size_t> fg_idx;
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < C; ++c)
            if (image[c * plane + i] != 0.0f) {
                fg[i] = 1;
                fg_idx.push_back(i);
                break;
            }
    }
    if (fg_idx.empty()) throw std::invalid_argument("inject_anomaly: empty foreground");

    Rng rng(derive_seed(spec.seed, {index}));
    const double d_mm = rng.uniform(spec.diameter_min_mm, spec.diameter_max_mm);
    const double r_px = d_mm / (2.0 * spec.mm_per_pixel);
    const double r2 = r_px * r_px;

    auto disc_fits = [&](std::size_t center) {
        const std::size_t cz = rank == 3 ? center / (H * W) : 0;
        const std::size_t cy = (center / W) % H;
        const std::size_t cx = center % W;
        const auto r_ceil = static_cast<std::int64_t>(std::ceil(r_px));
        for (std::int64_t dz = rank == 3 ? -r_ceil : 0; dz <= (rank == 3 ? r_ceil : 0); ++dz)
            for (std::int64_t dy = -r_ceil; dy <= r_ceil; ++dy)
                for (std::int64_t dx = -r_ceil; dx <= r_ceil; ++dx) {
                    if (dz * dz + dy * dy + dx * dx > r2) continue;
                    const std::int64_t z = static_cast<std::int64_t>(cz) + dz;
                    const std::int64_t y = static_cast<std::int64_t>(cy) + dy;
                    const std::int64_t x = static_cast<std::int64_t>(cx) + dx;
                    if (z < 0 || z >= static_cast<std::int64_t>(D) || y < 0 ||
                        y >= static_cast<std::int64_t>(H) || x < 0 ||
                        x >= static_cast<std::int64_t>(W))
                        return false;
                    if (!fg[(static_cast<std::size_t>(z) * H + static_cast<std::size_t>(y)) * W +
                            static_cast<std::size_t>(x)])
                        return false;
                }
        return true;
    };

    constexpr int kMaxTries = 256;
    std::size_t center = 0;
    bool placed = false;
    for (int t = 0; t < kMaxTries && !placed; ++t) {
        center = fg_idx[rng.uniform_int(fg_idx.size())];
        placed = disc_fits(center);
    }
    if (!placed)
        throw std::runtime_error("inject_anomaly: could not place a diameter-" +
                                 std::to_string(d_mm) + "mm anomaly inside the foreground");

    InjectResult res;
    res.image = image;
    res.mask = Tensor(std::vector<std::size_t>(image.dims().begin() + 1, image.dims().end()), 0.0f);
    res.diameter_mm = d_mm;
    const std::size_t cz = rank == 3 ? center / (H * W) : 0;
    const std::size_t cy = (center / W) % H;
    const std::size_t cx = center % W;
    const auto r_ceil = static_cast<std::int64_t>(std::ceil(r_px));
    for (std::int64_t dz = rank == 3 ? -r_ceil : 0; dz <= (rank == 3 ? r_ceil : 0); ++dz)
        for (std::int64_t dy = -r_ceil; dy <= r_ceil; ++dy)
            for (std::int64_t dx = -r_ceil; dx <= r_ceil; ++dx) {
                if (dz * dz + dy * dy + dx * dx > r2) continue;
                const std::size_t i =
                    ((cz + static_cast<std::size_t>(dz)) * H + (cy + static_cast<std::size_t>(dy))) * W +
                    (cx + static_cast<std::size_t>(dx));
                res.mask[i] = 1.0f;
                for (std::size_t c = 0; c < C; ++c) {
                    const double u = unmap_range(res.image[c * plane + i], intensity_range);
                    const double brightened = std::min(kForegroundMax, u * spec.intensity_factor);
                    res.image[c * plane + i] = map_range(brightened, intensity_range);
                }
            }
    return res;
}

DatasetPaths build_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    if (cfg.train < 1 || cfg.val < 1 || cfg.test < 1)
        throw std::invalid_argument("build_dataset: counts must be >= 1");
    fs::create_directories(out_dir);
    for (const char* split : {"train", "val", "test"}) fs::create_directories(out_dir + "/" + split);

    DatasetPaths paths;
    paths.dir = out_dir;

    auto make_split = [&](const std::string& split, std::size_t count, std::size_t index0,
                          bool anomalous) {
        io::DatasetManifest m;
        m.name = cfg.name;
        m.split = split;
        m.spatial_dims = cfg.phantom.shape;
        m.channels = cfg.phantom.channels;
        m.seed = static_cast<std::int64_t>(cfg.phantom.seed);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t index = index0 + i;
            Tensor img = gen_phantom(cfg.phantom, index);
            char name[64];
            io::ManifestItem item;
            if (anomalous) {
                InjectResult inj = inject_anomaly(img, cfg.anomaly, index, cfg.phantom.intensity_range);
                std::snprintf(name, sizeof(name), "%s/img_%04zu.nt", split.c_str(), i);
                io::write_tensor(inj.image, out_dir + "/" + name);
                item.image_path = name;
                std::snprintf(name, sizeof(name), "%s/mask_%04zu.nt", split.c_str(), i);
                io::write_tensor(inj.mask, out_dir + "/" + name);
                item.mask_path = name;
                char meta[32];
                std::snprintf(meta, sizeof(meta), "%.6g", inj.diameter_mm);
                item.metadata["diameter_mm"] = meta;
            } else {
                std::snprintf(name, sizeof(name), "%s/img_%04zu.nt", split.c_str(), i);
                io::write_tensor(img, out_dir + "/" + name);
                item.image_path = name;
            }
            m.items.push_back(std::move(item));
        }
        const std::string mpath = out_dir + "/" + split + ".json";
        io::write_manifest(m, mpath);
        return mpath;
    };

    paths.train_manifest = make_split("train", cfg.train, 0, false);
    paths.val_manifest = make_split("val", cfg.val, cfg.train, false);
    paths.test_manifest = make_split("test", cfg.test, cfg.train + cfg.val, true);
    return paths;
}

}  // namespace nad::synth
