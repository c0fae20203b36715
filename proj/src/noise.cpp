#include "nad/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "nad/kernels.hpp"
#include "nad/rng.hpp"
#include "nad/simplex.hpp"

namespace nad::noise {

Kind kind_from_string(const std::string& s) {
    if (s == "pixelwise") return Kind::pixelwise;
    if (s == "coarse") return Kind::coarse;
    if (s == "simplex") return Kind::simplex;
    throw std::invalid_argument("unknown noise kind: " + s);
}

std::string to_string(Kind k) {
    switch (k) {
        case Kind::pixelwise: return "pixelwise";
        case Kind::coarse: return "coarse";
        case Kind::simplex: return "simplex";
    }
    return "?";
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
    if (shape.size() != 2 && shape.size() != 3)
        throw std::invalid_argument("noise: spatial shape must be rank 2 or 3");
    for (auto d : shape)
        if (d < 1) throw std::invalid_argument("noise: dims must be >= 1");
}

}  // namespace

Tensor gen_pixelwise(const std::vector<std::size_t>& shape, double sigma, std::uint64_t seed) {
    check_shape(shape);
    if (sigma < 0.0) throw std::invalid_argument("gen_pixelwise: sigma must be >= 0");
    Tensor out(shape);
    Rng rng(seed);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(rng.normal(0.0, sigma));
    return out;
}

Tensor gen_coarse(const std::vector<std::size_t>& shape, std::size_t alpha, double sigma,
                  std::uint64_t seed) {
    check_shape(shape);
    if (sigma < 0.0) throw std::invalid_argument("gen_coarse: sigma must be >= 0");
    std::size_t min_dim = shape[0];
    for (auto d : shape) min_dim = std::min(min_dim, d);
    if (alpha < 1 || alpha > min_dim)
        throw std::invalid_argument("gen_coarse: require 1 <= alpha <= min(shape)");

    Rng rng(seed);
    std::vector<std::size_t> grid_shape(shape.size(), alpha);
    Tensor grid(grid_shape);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = static_cast<float>(rng.normal(0.0, sigma));

    Tensor up(shape);
    if (shape.size() == 2) {
        kern::upsample_bilinear(grid.data(), static_cast<kern::i64>(alpha),
                                static_cast<kern::i64>(alpha), up.data(),
                                static_cast<kern::i64>(shape[0]), static_cast<kern::i64>(shape[1]));
    } else {
        kern::upsample_trilinear(grid.data(), static_cast<kern::i64>(alpha),
                                 static_cast<kern::i64>(alpha), static_cast<kern::i64>(alpha),
                                 up.data(), static_cast<kern::i64>(shape[0]),
                                 static_cast<kern::i64>(shape[1]), static_cast<kern::i64>(shape[2]));
    }

    std::vector<std::int64_t> offsets(shape.size());
    for (std::size_t a = 0; a < shape.size(); ++a)
        offsets[a] = static_cast<std::int64_t>(rng.uniform_int(shape[a]));
    return wrap_translate(up, offsets);
}

Tensor gen_simplex(const std::vector<std::size_t>& shape, const SimplexParams& params,
                   std::uint64_t seed) {
    check_shape(shape);
    if (params.octaves < 1) throw std::invalid_argument("gen_simplex: octaves must be >= 1");
    if (params.base_frequency < 0.0)
        throw std::invalid_argument("gen_simplex: base_frequency must be positive");

    std::size_t max_dim = 0;
    for (auto d : shape) max_dim = std::max(max_dim, d);
    double freq0 = params.base_frequency;
    if (freq0 == 0.0) freq0 = 8.0 / static_cast<double>(max_dim);

    const Simplex noise(derive_seed(seed, {0}));
    Rng rng(derive_seed(seed, {1}));
    // Per-octave lattice offsets decorrelate octaves and keep pixel
    // coordinates off any alignment with the simplex lattice.
    const int oct = params.octaves;
    std::vector<std::array<double, 3>> shift(static_cast<std::size_t>(oct));
    for (auto& s : shift)
        for (auto& v : s) v = rng.uniform(0.0, 4096.0);

    double amp_total = 0.0, amp = 1.0;
    for (int o = 0; o < oct; ++o, amp *= params.persistence) amp_total += amp;

    Tensor out(shape);
    if (shape.size() == 2) {
        const auto h = static_cast<kern::i64>(shape[0]);
        const auto w = static_cast<kern::i64>(shape[1]);
#pragma omp parallel for schedule(static)
        for (kern::i64 y = 0; y < h; ++y) {
            for (kern::i64 x = 0; x < w; ++x) {
                double v = 0.0, a = 1.0, f = freq0;
                for (int o = 0; o < oct; ++o, a *= params.persistence, f *= 2.0)
                    v += a * noise.eval2(x * f + shift[o][0], y * f + shift[o][1]);
                out[static_cast<std::size_t>(y * w + x)] = static_cast<float>(v / amp_total);
            }
        }
    } else {
        const auto d = static_cast<kern::i64>(shape[0]);
        const auto h = static_cast<kern::i64>(shape[1]);
        const auto w = static_cast<kern::i64>(shape[2]);
#pragma omp parallel for schedule(static)
        for (kern::i64 z = 0; z < d; ++z) {
            for (kern::i64 y = 0; y < h; ++y)
                for (kern::i64 x = 0; x < w; ++x) {
                    double v = 0.0, a = 1.0, f = freq0;
                    for (int o = 0; o < oct; ++o, a *= params.persistence, f *= 2.0)
                        v += a * noise.eval3(x * f + shift[o][0], y * f + shift[o][1],
                                             z * f + shift[o][2]);
                    out[static_cast<std::size_t>((z * h + y) * w + x)] =
                        static_cast<float>(v / amp_total);
                }
        }
    }
    return out;
}

Tensor wrap_translate(const Tensor& field, const std::vector<std::int64_t>& offsets) {
    if (offsets.size() != field.ndim())
        throw std::invalid_argument("wrap_translate: offsets rank mismatch");
    const auto& dims = field.dims();
    std::vector<std::size_t> off(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) {
        const auto d = static_cast<std::int64_t>(dims[a]);
        off[a] = static_cast<std::size_t>(((offsets[a] % d) + d) % d);
    }
    Tensor out(dims);
    if (dims.size() == 2) {
        const std::size_t h = dims[0], w = dims[1];
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t sy = (y + h - off[0]) % h;
            for (std::size_t x = 0; x < w; ++x)
                out[y * w + x] = field[sy * w + (x + w - off[1]) % w];
        }
    } else if (dims.size() == 3) {
        const std::size_t d = dims[0], h = dims[1], w = dims[2];
        for (std::size_t z = 0; z < d; ++z) {
            const std::size_t sz = (z + d - off[0]) % d;
            for (std::size_t y = 0; y < h; ++y) {
                const std::size_t sy = (y + h - off[1]) % h;
                for (std::size_t x = 0; x < w; ++x)
                    out[(z * h + y) * w + x] = field[(sz * h + sy) * w + (x + w - off[2]) % w];
            }
        }
    } else {
        throw std::invalid_argument("wrap_translate: rank 2 or 3 only");
    }
    return out;
}

NoiseField generate(const NoiseSpec& spec, const std::vector<std::size_t>& spatial,
                    std::uint64_t seed) {
    NoiseField f;
    f.spec = spec;
    f.spec.seed = seed;
    switch (spec.kind) {
        case Kind::pixelwise: f.values = gen_pixelwise(spatial, spec.sigma, seed); break;
        case Kind::coarse: f.values = gen_coarse(spatial, spec.alpha, spec.sigma, seed); break;
        case Kind::simplex: f.values = gen_simplex(spatial, spec.simplex, seed); break;
    }
    return f;
}

Tensor generate_channels(const NoiseSpec& spec, std::size_t channels,
                         const std::vector<std::size_t>& spatial, std::uint64_t seed) {
    std::vector<std::size_t> dims;
    dims.push_back(channels);
    for (auto d : spatial) dims.push_back(d);
    Tensor out(dims);
    std::size_t plane = 1;
    for (auto d : spatial) plane *= d;
    for (std::size_t c = 0; c < channels; ++c) {
        const NoiseField f = generate(spec, spatial, derive_seed(seed, {c}));
        std::copy(f.values.data(), f.values.data() + plane, out.data() + c * plane);
    }
    return out;
}

Tensor standardized(Tensor field) {
    const double var = pooled_var(field);
    if (var <= 0.0) return field;
    const auto scale = static_cast<float>(1.0 / std::sqrt(var));
    for (std::size_t i = 0; i < field.size(); ++i) field[i] *= scale;
    return field;
}

}  // namespace nad::noise
