#ifndef NAD_KERNELS_REF_HPP
#define NAD_KERNELS_REF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

// Serial reference kernels. Each one evaluates its defining formula
// per output element with no reordering tricks, so the tests can hold the
// OpenMP kernels to bit-exact agreement.

namespace nad::kern_ref {

using i64 = std::int64_t;

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y,
                    i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
    for (i64 n = 0; n < N; ++n)
        for (i64 oc = 0; oc < Cout; ++oc) {
            T* yp = y + ((n * Cout + oc) * H) * W;
            for (i64 i = 0; i < H * W; ++i) yp[i] = b ? b[oc] : T(0);
            for (i64 ic = 0; ic < Cin; ++ic)
                for (i64 ky = 0; ky < K; ++ky)
                    for (i64 kx = 0; kx < K; ++kx) {
                        const T wv = w[((oc * Cin + ic) * K + ky) * K + kx];
                        for (i64 oy = 0; oy < H; ++oy) {
                            const i64 iy = oy + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (i64 ox = 0; ox < W; ++ox) {
                                const i64 ix = ox + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                yp[oy * W + ox] += wv * x[((n * Cin + ic) * H + iy) * W + ix];
                            }
                        }
                    }
        }
}

template <typename T>
void conv2d_backward_data(const T* dy, const T* w, T* dx,
                          i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
    for (i64 n = 0; n < N; ++n)
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dxp = dx + ((n * Cin + ic) * H) * W;
            for (i64 i = 0; i < H * W; ++i) dxp[i] = T(0);
            for (i64 oc = 0; oc < Cout; ++oc)
                for (i64 ky = 0; ky < K; ++ky)
                    for (i64 kx = 0; kx < K; ++kx) {
                        const T wv = w[((oc * Cin + ic) * K + ky) * K + kx];
                        for (i64 iy = 0; iy < H; ++iy) {
                            const i64 oy = iy + ky - pad;
                            if (oy < 0 || oy >= H) continue;
                            for (i64 ix = 0; ix < W; ++ix) {
                                const i64 ox = ix + kx - pad;
                                if (ox < 0 || ox >= W) continue;
                                dxp[iy * W + ix] += wv * dy[((n * Cout + oc) * H + oy) * W + ox];
                            }
                        }
                    }
        }
}

template <typename T>
void conv2d_backward_weights(const T* x, const T* dy, T* dw, T* db,
                             i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
    for (i64 oc = 0; oc < Cout; ++oc) {
        if (db) {
            T acc = T(0);
            for (i64 n = 0; n < N; ++n)
                for (i64 i = 0; i < H * W; ++i) acc += dy[((n * Cout + oc) * H) * W + i];
            db[oc] = acc;
        }
        for (i64 ic = 0; ic < Cin; ++ic)
            for (i64 ky = 0; ky < K; ++ky)
                for (i64 kx = 0; kx < K; ++kx) {
                    T acc = T(0);
                    for (i64 n = 0; n < N; ++n)
                        for (i64 oy = 0; oy < H; ++oy) {
                            const i64 iy = oy + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (i64 ox = 0; ox < W; ++ox) {
                                const i64 ix = ox + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                acc += dy[((n * Cout + oc) * H + oy) * W + ox] *
                                       x[((n * Cin + ic) * H + iy) * W + ix];
                            }
                        }
                    dw[((oc * Cin + ic) * K + ky) * K + kx] = acc;
                }
    }
}

template <typename T>
void groupnorm_forward(const T* x, const T* gamma, const T* beta, T* y,
                       T* save_mean, T* save_rstd,
                       i64 N, i64 C, i64 spatial, i64 groups, double eps) {
    const i64 cpg = C / groups;
    const i64 gsize = cpg * spatial;
    for (i64 n = 0; n < N; ++n)
        for (i64 g = 0; g < groups; ++g) {
            const T* xg = x + (n * C + g * cpg) * spatial;
            double s = 0.0, s2 = 0.0;
            for (i64 i = 0; i < gsize; ++i) {
                s += static_cast<double>(xg[i]);
                s2 += static_cast<double>(xg[i]) * static_cast<double>(xg[i]);
            }
            const double mean = s / static_cast<double>(gsize);
            const double var = std::max(0.0, s2 / static_cast<double>(gsize) - mean * mean);
            const double rstd = 1.0 / std::sqrt(var + eps);
            save_mean[n * groups + g] = static_cast<T>(mean);
            save_rstd[n * groups + g] = static_cast<T>(rstd);
            for (i64 c = 0; c < cpg; ++c) {
                const T a = static_cast<T>(rstd) * gamma[g * cpg + c];
                const T bb = beta[g * cpg + c] - static_cast<T>(mean) * a;
                for (i64 i = 0; i < spatial; ++i)
                    y[(n * C + g * cpg + c) * spatial + i] = a * xg[c * spatial + i] + bb;
            }
        }
}

template <typename T>
void upsample_bilinear(const T* src, i64 sh, i64 sw, T* dst, i64 dh, i64 dw) {
    for (i64 oy = 0; oy < dh; ++oy)
        for (i64 ox = 0; ox < dw; ++ox) {
            const double sy = (static_cast<double>(oy) + 0.5) * sh / dh - 0.5;
            const double sx = (static_cast<double>(ox) + 0.5) * sw / dw - 0.5;
            i64 y0 = static_cast<i64>(std::floor(sy)), x0 = static_cast<i64>(std::floor(sx));
            T fy = static_cast<T>(sy - std::floor(sy)), fx = static_cast<T>(sx - std::floor(sx));
            i64 y1 = y0 + 1, x1 = x0 + 1;
            if (y0 < 0) { y0 = 0; y1 = 0; fy = T(0); }
            if (x0 < 0) { x0 = 0; x1 = 0; fx = T(0); }
            if (y1 >= sh) { y1 = sh - 1; if (y0 >= sh) y0 = sh - 1; }
            if (x1 >= sw) { x1 = sw - 1; if (x0 >= sw) x0 = sw - 1; }
            dst[oy * dw + ox] = (T(1) - fy) * ((T(1) - fx) * src[y0 * sw + x0] + fx * src[y0 * sw + x1]) +
                                fy * ((T(1) - fx) * src[y1 * sw + x0] + fx * src[y1 * sw + x1]);
        }
}

template <typename T>
void median_filter2d(const T* src, T* dst, i64 H, i64 W, i64 k) {
    const i64 r = k / 2;
    std::vector<T> buf;
    for (i64 y = 0; y < H; ++y)
        for (i64 x = 0; x < W; ++x) {
            buf.clear();
            for (i64 dy = -r; dy <= r; ++dy)
                for (i64 dx = -r; dx <= r; ++dx) {
                    const i64 sy = std::clamp<i64>(y + dy, 0, H - 1);
                    const i64 sx = std::clamp<i64>(x + dx, 0, W - 1);
                    buf.push_back(src[sy * W + sx]);
                }
            std::sort(buf.begin(), buf.end());
            dst[y * W + x] = buf[buf.size() / 2];
        }
}

}  // namespace nad::kern_ref

#endif
