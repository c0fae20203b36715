#ifndef NAD_SYNTH_HPP
#define NAD_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nad/io.hpp"
#include "nad/tensor.hpp"

namespace nad::synth {

/// Healthy phantom generator: a nested-ellipse foreground (head outline +
/// darker ventricle-like core) carrying smooth sinusoidal fold texture.
/// Background is exactly 0 in every channel; foreground intensities lie in
/// [kForegroundMin, kForegroundMax] before any range mapping.
struct PhantomSpec {
    std::vector<std::size_t> shape = {64, 64};   // 2D (H,W) or 3D (D,H,W)
    std::size_t channels = 1;
    std::string intensity_range = "unit";        // unit [0,1] | symmetric [-1,1]
    double texture_amp_min = 0.10, texture_amp_max = 0.16;
    double texture_wavelength_min = 8.0, texture_wavelength_max = 16.0;
    std::uint64_t seed = 17;
};

inline constexpr double kForegroundMin = 0.2;
inline constexpr double kForegroundMax = 1.0;

/// Bright disc/sphere anomalies: diameter uniform in physical units, tissue
/// intensity inside multiplied by intensity_factor (applied in the unit
/// intensity domain) and clamped at the range maximum.
struct AnomalySpec {
    double diameter_min_mm = 5.0, diameter_max_mm = 50.0;
    double mm_per_pixel = 2.0;
    double intensity_factor = 2.0;
    std::uint64_t seed = 99;
};

Tensor gen_phantom(const PhantomSpec& spec, std::size_t index);

struct InjectResult {
    Tensor image;        // (C, spatial...)
    Tensor mask;         // (spatial...), 1 exactly on the disc pixels
    double diameter_mm = 0.0;
};

/// Places one anomaly fully inside the foreground (bounded retries, then
/// error). The mask marks the disc even when intensity_factor = 1.
InjectResult inject_anomaly(const Tensor& image, const AnomalySpec& spec, std::size_t index,
                            const std::string& intensity_range = "unit");

struct DatasetConfig {
    std::string name = "synth";
    std::size_t train = 200, val = 20, test = 50;
    PhantomSpec phantom;
    AnomalySpec anomaly;
};

struct DatasetPaths {
    std::string dir;
    std::string train_manifest, val_manifest, test_manifest;
};

/// Writes the dataset tree (train/val healthy, test anomalous with masks)
/// and the three manifests under out_dir. Fully deterministic per seed:
/// rebuilding with the same config yields byte-identical files.
DatasetPaths build_dataset(const DatasetConfig& cfg, const std::string& out_dir);

}  // namespace nad::synth

#endif
