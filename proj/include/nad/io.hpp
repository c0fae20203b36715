#ifndef NAD_IO_HPP
#define NAD_IO_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nad/tensor.hpp"

namespace nad::io {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Tensor file layout (little-endian throughout):
//   magic "NADT" | u8 dtype (1 = f32) | u8 ndim | u32 dims[ndim] | f32 payload
// Payload is row-major. Round-trips are bit-exact.

void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

/// Exports an anomaly map (or any 2D tensor, shape (H,W) or (1,H,W)) as a
/// binary PGM (P5, maxval 255): v -> round(255*clamp((v-lo)/(hi-lo),0,1)).
void write_pgm(const Tensor& map, const std::string& path, float lo, float hi);

struct ManifestItem {
    std::string image_path;                       // relative to the manifest dir
    std::optional<std::string> mask_path;
    std::map<std::string, std::string> metadata;
};

struct DatasetManifest {
    std::string name;
    std::string split;                            // train | val | test
    std::vector<ManifestItem> items;
    std::vector<std::size_t> spatial_dims;
    std::size_t channels = 1;
    std::int64_t seed = 0;
    std::string base_dir;                         // set on load; not serialized

    std::string image_file(std::size_t i) const { return base_dir + "/" + items.at(i).image_path; }
    std::string mask_file(std::size_t i) const { return base_dir + "/" + *items.at(i).mask_path; }
};

void write_manifest(const DatasetManifest& m, const std::string& path);

/// Loads and validates a manifest. Every referenced file must exist and
/// parse, shapes must match the declared dims/channels, and train-split
/// items must be healthy (no mask, or an all-zero mask). Violations are
/// rejected here, not at first use.
DatasetManifest load_manifest(const std::string& path);

/// Loads all images of a manifest as (C, spatial...) tensors.
std::vector<Tensor> load_images(const DatasetManifest& m);
/// Loads masks as (spatial...) tensors; items without a mask get all-zeros.
std::vector<Tensor> load_masks(const DatasetManifest& m);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Content hash over the manifest and every referenced tensor file.
std::string dataset_hash(const DatasetManifest& m, const std::string& manifest_path);

}  // namespace nad::io

#endif
