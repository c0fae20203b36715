#ifndef NAD_NOISE_HPP
#define NAD_NOISE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nad/tensor.hpp"

namespace nad::noise {

enum class Kind { pixelwise, coarse, simplex };

Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

struct SimplexParams {
    int octaves = 6;
    double persistence = 0.8;
    // Cycles per pixel of the lowest octave; 0 selects the default where the
    // lowest octave spans ~1/8 of the largest spatial extent.
    double base_frequency = 0.0;
};

struct NoiseSpec {
    Kind kind = Kind::coarse;
    std::size_t alpha = 16;     // generation resolution per axis (coarse only)
    double sigma = 0.2;         // generating std of the Gaussian kinds
    SimplexParams simplex;
    std::uint64_t seed = 0;
};

struct NoiseField {
    Tensor values;              // spatial shape, single channel
    NoiseSpec spec;
};

/// iid N(0, sigma^2) over the given spatial shape (2D or 3D).
/// Draw order is row-major; deterministic per seed.
Tensor gen_pixelwise(const std::vector<std::size_t>& shape, double sigma, std::uint64_t seed);

/// Coarse noise: an alpha^d grid of N(0, sigma^2) samples, bilinearly
/// (trilinearly) upsampled to `shape`, then circularly translated by
/// per-axis integer offsets drawn uniformly in [0, dim). Grid samples are
/// drawn row-major first, then the offsets in axis order.
Tensor gen_coarse(const std::vector<std::size_t>& shape, std::size_t alpha, double sigma,
                  std::uint64_t seed);

/// Multi-octave simplex noise in [-1, 1]; octave o runs at
/// base_frequency * 2^o with amplitude persistence^o, amplitudes normalized
/// so the octave sum stays bounded. Magnitude scaling is the caller's job.
Tensor gen_simplex(const std::vector<std::size_t>& shape, const SimplexParams& params,
                   std::uint64_t seed);

/// Circular shift; offsets are taken modulo the dims, so the value multiset
/// is preserved exactly.
Tensor wrap_translate(const Tensor& field, const std::vector<std::int64_t>& offsets);

/// Dispatch on spec.kind; `seed` overrides spec.seed.
NoiseField generate(const NoiseSpec& spec, const std::vector<std::size_t>& spatial,
                    std::uint64_t seed);

/// Multi-channel field (C, spatial...); channel c uses the sub-seed
/// derive_seed(seed, {c}), making channels statistically independent.
Tensor generate_channels(const NoiseSpec& spec, std::size_t channels,
                         const std::vector<std::size_t>& spatial, std::uint64_t seed);

/// Rescales a field to unit pooled variance (no-op on all-constant fields).
Tensor standardized(Tensor field);

}  // namespace nad::noise

#endif
