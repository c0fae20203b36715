#ifndef NAD_UNET_HPP
#define NAD_UNET_HPP

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nad/nn.hpp"

namespace nad::nn {

enum class Target { image, noise };

/// Denoiser architecture. stages = stage_channels.size(); each stage halves
/// the spatial dims, so inputs must be divisible by 2^stages.
struct DenoiserConfig {
    int spatial_rank = 2;
    std::size_t in_channels = 1;
    std::vector<std::size_t> stage_channels = {16, 32, 64};
    std::size_t gn_groups = 8;
    bool time_conditioned = false;
    std::size_t time_embed_dim = 64;
    bool weight_standardization = true;
    bool residual_blocks = false;
};

inline void validate_config(const DenoiserConfig& cfg) {
    if (cfg.spatial_rank != 2 && cfg.spatial_rank != 3)
        throw std::invalid_argument("DenoiserConfig: spatial_rank must be 2 or 3");
    if (cfg.stage_channels.empty())
        throw std::invalid_argument("DenoiserConfig: need at least one stage");
    for (auto c : cfg.stage_channels)
        if (c % cfg.gn_groups != 0)
            throw std::invalid_argument("DenoiserConfig: gn_groups must divide every stage width");
    if (cfg.time_conditioned && cfg.time_embed_dim < 2)
        throw std::invalid_argument("DenoiserConfig: time_embed_dim too small");
}

/// Sinusoidal timestep features, (N,) -> (N, dim).
template <typename T>
NDArray<T> timestep_embedding(const std::vector<std::size_t>& t, std::size_t dim) {
    const std::size_t half = dim / 2;
    NDArray<T> out({t.size(), dim}, T(0));
    for (std::size_t n = 0; n < t.size(); ++n) {
        for (std::size_t i = 0; i < half; ++i) {
            const double freq =
                std::exp(-std::log(10000.0) * static_cast<double>(i) /
                         static_cast<double>(half > 1 ? half - 1 : 1));
            const double a = static_cast<double>(t[n]) * freq;
            out[n * dim + i] = static_cast<T>(std::sin(a));
            out[n * dim + half + i] = static_cast<T>(std::cos(a));
        }
    }
    return out;
}

/// Two convs with group norm and Swish; optional per-channel timestep shift
/// after the first activation and optional residual connection.
template <typename T>
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(const DenoiserConfig& cfg, std::size_t cin, std::size_t cout, const std::string& name)
        : cin_(cin),
          cout_(cout),
          residual_(cfg.residual_blocks),
          time_(cfg.time_conditioned),
          conv1_(cfg.spatial_rank, cin, cout, 3, 1, cfg.weight_standardization, name + ".conv1"),
          conv2_(cfg.spatial_rank, cout, cout, 3, 1, cfg.weight_standardization, name + ".conv2"),
          gn1_(cout, cfg.gn_groups, name + ".gn1"),
          gn2_(cout, cfg.gn_groups, name + ".gn2") {
        if (time_) tproj_ = Linear<T>(cfg.time_embed_dim, cout, name + ".tproj");
        if (residual_ && cin != cout)
            skip_ = std::make_unique<Conv<T>>(cfg.spatial_rank, cin, cout, 1, 0, false,
                                              name + ".skip");
    }

    void init(Rng& rng) {
        conv1_.init(rng);
        gn1_.init(rng);
        conv2_.init(rng);
        gn2_.init(rng);
        if (time_) tproj_.init(rng);
        if (skip_) skip_->init(rng);
    }

    NDArray<T> forward(const NDArray<T>& x, const NDArray<T>* temb) {
        NDArray<T> h = act1_.forward(gn1_.forward(conv1_.forward(x)));
        if (time_) {
            const NDArray<T> shift = tproj_.forward(*temb);  // (N, cout)
            const std::size_t N = h.dim(0);
            std::size_t plane = 1;
            for (std::size_t d = 2; d < h.ndim(); ++d) plane *= h.dim(d);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < cout_; ++c) {
                    T* hp = h.data() + (n * cout_ + c) * plane;
                    const T s = shift[n * cout_ + c];
                    for (std::size_t i = 0; i < plane; ++i) hp[i] += s;
                }
        }
        NDArray<T> out = act2_.forward(gn2_.forward(conv2_.forward(h)));
        if (residual_) {
            if (skip_) {
                NDArray<T> sk = skip_->forward(x);
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += sk[i];
            } else {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
            }
        }
        return out;
    }

    /// Returns dx; when time-conditioned also accumulates into dtemb.
    NDArray<T> backward(const NDArray<T>& dy, NDArray<T>* dtemb) {
        NDArray<T> dh = conv2_.backward(gn2_.backward(act2_.backward(dy)));
        if (time_) {
            const std::size_t N = dh.dim(0);
            std::size_t plane = 1;
            for (std::size_t d = 2; d < dh.ndim(); ++d) plane *= dh.dim(d);
            NDArray<T> dshift({N, cout_}, T(0));
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < cout_; ++c) {
                    const T* hp = dh.data() + (n * cout_ + c) * plane;
                    T acc = T(0);
                    for (std::size_t i = 0; i < plane; ++i) acc += hp[i];
                    dshift[n * cout_ + c] = acc;
                }
            const NDArray<T> dt = tproj_.backward(dshift);
            for (std::size_t i = 0; i < dtemb->size(); ++i) (*dtemb)[i] += dt[i];
        }
        NDArray<T> dx = conv1_.backward(gn1_.backward(act1_.backward(dh)));
        if (residual_) {
            if (skip_) {
                NDArray<T> ds = skip_->backward(dy);
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
            } else {
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        conv1_.collect(out);
        gn1_.collect(out);
        conv2_.collect(out);
        gn2_.collect(out);
        if (time_) tproj_.collect(out);
        if (skip_) skip_->collect(out);
    }

private:
    std::size_t cin_ = 0, cout_ = 0;
    bool residual_ = false, time_ = false;
    Conv<T> conv1_, conv2_;
    GroupNorm<T> gn1_, gn2_;
    Swish<T> act1_, act2_;
    Linear<T> tproj_;
    std::unique_ptr<Conv<T>> skip_;
};

/// U-Net denoiser: encoder blocks with 2x average pooling, a bottleneck
/// block, transposed-conv upsampling with skip concatenation, and a final
/// 1x1 projection back to the input channel count.
template <typename T>
class UNet {
public:
    explicit UNet(const DenoiserConfig& cfg) : cfg_(cfg) {
        validate_config(cfg);
        const auto& ch = cfg.stage_channels;
        const std::size_t S = ch.size();
        for (std::size_t s = 0; s < S; ++s) {
            enc_.emplace_back(cfg, s == 0 ? cfg.in_channels : ch[s - 1], ch[s],
                              "enc" + std::to_string(s));
            pool_.emplace_back(cfg.spatial_rank);
        }
        bottleneck_ = ConvBlock<T>(cfg, ch[S - 1], ch[S - 1], "mid");
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t below = (s == S - 1) ? ch[S - 1] : ch[s + 1];
            up_.emplace_back(cfg.spatial_rank, below, ch[s], "up" + std::to_string(s));
            dec_.emplace_back(cfg, 2 * ch[s], ch[s], "dec" + std::to_string(s));
        }
        out_conv_ = Conv<T>(cfg.spatial_rank, ch[0], cfg.in_channels, 1, 0, false, "out");
        if (cfg.time_conditioned) {
            tmlp1_ = Linear<T>(cfg.time_embed_dim, cfg.time_embed_dim, "tmlp1");
            tmlp2_ = Linear<T>(cfg.time_embed_dim, cfg.time_embed_dim, "tmlp2");
        }
        cat_ca_.assign(S, 0);
        collect_params();
    }

    // params_ holds pointers into the layer members; relocating the net
    // would invalidate them.
    UNet(const UNet&) = delete;
    UNet& operator=(const UNet&) = delete;
    UNet(UNet&&) = delete;
    UNet& operator=(UNet&&) = delete;

    const DenoiserConfig& config() const { return cfg_; }

    void init(std::uint64_t seed) {
        Rng rng(seed);
        for (auto& e : enc_) e.init(rng);
        bottleneck_.init(rng);
        for (std::size_t s = 0; s < up_.size(); ++s) {
            up_[s].init(rng);
            dec_[s].init(rng);
        }
        out_conv_.init(rng);
        if (cfg_.time_conditioned) {
            tmlp1_.init(rng);
            tmlp2_.init(rng);
        }
    }

    /// x: (N, C, spatial...); t: per-sample timesteps, required iff
    /// time-conditioned.
    NDArray<T> forward(const NDArray<T>& x, const std::vector<std::size_t>* t = nullptr) {
        check_input(x, t);
        const std::size_t S = enc_.size();
        NDArray<T>* temb_ptr = nullptr;
        if (cfg_.time_conditioned) {
            temb_in_ = timestep_embedding<T>(*t, cfg_.time_embed_dim);
            temb_ = tmlp2_.forward(tact_.forward(tmlp1_.forward(temb_in_)));
            temb_ptr = &temb_;
        }
        std::vector<NDArray<T>> feats(S);
        NDArray<T> h = x;
        for (std::size_t s = 0; s < S; ++s) {
            feats[s] = enc_[s].forward(h, temb_ptr);
            h = pool_[s].forward(feats[s]);
        }
        h = bottleneck_.forward(h, temb_ptr);
        for (std::size_t i = 0; i < S; ++i) {
            const std::size_t s = S - 1 - i;
            h = up_[s].forward(h);
            cat_ca_[s] = h.dim(1);
            h = dec_[s].forward(concat_channels(h, feats[s]), temb_ptr);
        }
        return out_conv_.forward(h);
    }

    /// dLoss/dOutput in, dLoss/dInput out; parameter grads land in params().
    NDArray<T> backward(const NDArray<T>& dy) {
        const std::size_t S = enc_.size();
        NDArray<T>* dtemb_ptr = nullptr;
        if (cfg_.time_conditioned) {
            dtemb_ = NDArray<T>(temb_.dims(), T(0));
            dtemb_ptr = &dtemb_;
        }
        NDArray<T> dh = out_conv_.backward(dy);
        std::vector<NDArray<T>> dfeats(S);
        for (std::size_t s = 0; s < S; ++s) {
            NDArray<T> dcat = dec_[s].backward(dh, dtemb_ptr);
            NDArray<T> dup;
            split_channels(dcat, cat_ca_[s], dup, dfeats[s]);
            dh = up_[s].backward(dup);
        }
        dh = bottleneck_.backward(dh, dtemb_ptr);
        for (std::size_t i = 0; i < S; ++i) {
            const std::size_t s = S - 1 - i;
            NDArray<T> dfeat = pool_[s].backward(dh);
            for (std::size_t j = 0; j < dfeat.size(); ++j) dfeat[j] += dfeats[s][j];
            dh = enc_[s].backward(dfeat, dtemb_ptr);
        }
        if (cfg_.time_conditioned) tmlp1_.backward(tact_.backward(tmlp2_.backward(dtemb_)));
        return dh;
    }

    std::vector<Param<T>*>& params() { return params_; }

    void zero_grad() {
        for (auto* p : params_) p->grad.fill(T(0));
    }

private:
    void check_input(const NDArray<T>& x, const std::vector<std::size_t>* t) const {
        const auto rank = static_cast<std::size_t>(cfg_.spatial_rank);
        if (x.ndim() != rank + 2)
            throw std::invalid_argument("UNet: input rank mismatch");
        if (x.dim(1) != cfg_.in_channels)
            throw std::invalid_argument("UNet: channel count mismatch");
        const std::size_t div = std::size_t{1} << enc_.size();
        for (std::size_t d = 2; d < x.ndim(); ++d)
            if (x.dim(d) % div != 0)
                throw std::invalid_argument(
                    "UNet: spatial dims must be divisible by 2^stages");
        if (cfg_.time_conditioned) {
            if (!t) throw std::invalid_argument("UNet: time-conditioned model requires t");
            if (t->size() != x.dim(0))
                throw std::invalid_argument("UNet: one timestep per batch item required");
        } else if (t) {
            throw std::invalid_argument("UNet: t supplied to a time-unconditioned model");
        }
    }

    void collect_params() {
        params_.clear();
        for (auto& e : enc_) e.collect(params_);
        bottleneck_.collect(params_);
        for (std::size_t s = 0; s < up_.size(); ++s) {
            up_[s].collect(params_);
            dec_[s].collect(params_);
        }
        out_conv_.collect(params_);
        if (cfg_.time_conditioned) {
            tmlp1_.collect(params_);
            tmlp2_.collect(params_);
        }
    }

    DenoiserConfig cfg_;
    std::vector<ConvBlock<T>> enc_;
    std::vector<AvgPool<T>> pool_;
    ConvBlock<T> bottleneck_;
    std::vector<TConv<T>> up_;
    std::vector<ConvBlock<T>> dec_;
    Conv<T> out_conv_;
    Linear<T> tmlp1_, tmlp2_;
    Swish<T> tact_;
    NDArray<T> temb_in_, temb_, dtemb_;
    std::vector<std::size_t> cat_ca_;
    std::vector<Param<T>*> params_;
};

}  // namespace nad::nn

#endif
