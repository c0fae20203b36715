#ifndef NAD_KERNELS_HPP
#define NAD_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

// OpenMP-parallel compute kernels. Every kernel is gather-style: a thread
// owns an output element (or plane) and runs its reduction serially in a
// fixed order, so results do not depend on the thread count. The serial
// references in kernels_ref.hpp evaluate the same formulas naively;
// tests/test_kernels.cpp holds the arithmetic kernels to rounding-level
// agreement (FMA contraction may differ between loop structures) and the
// selection-only kernels (median filter) to bit equality.
// tools/bench_kernels.cpp compares throughput.
//
// Array layouts are dense row-major: activations (N,C,H,W) or (N,C,D,H,W),
// conv weights (Cout,Cin,K,K[,K]), transposed-conv weights (Cin,Cout,2,2[,2]).

namespace nad::kern {

using i64 = std::int64_t;

// ---------------------------------------------------------------------------
// 2D convolution, stride 1, square kernel, zero padding
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y,
                    i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            T* yp = y + ((n * Cout + oc) * H) * W;
            const T bias = b ? b[oc] : T(0);
            for (i64 i = 0; i < H * W; ++i) yp[i] = bias;
            for (i64 ic = 0; ic < Cin; ++ic) {
                const T* xp = x + ((n * Cin + ic) * H) * W;
                const T* wp = w + ((oc * Cin + ic) * K) * K;
                for (i64 ky = 0; ky < K; ++ky) {
                    for (i64 kx = 0; kx < K; ++kx) {
                        const T wv = wp[ky * K + kx];
                        const i64 oy0 = std::max<i64>(0, pad - ky);
                        const i64 oy1 = std::min<i64>(H, H + pad - ky);
                        const i64 ox0 = std::max<i64>(0, pad - kx);
                        const i64 ox1 = std::min<i64>(W, W + pad - kx);
                        for (i64 oy = oy0; oy < oy1; ++oy) {
                            T* yrow = yp + oy * W;
                            const T* xrow = xp + (oy + ky - pad) * W + (kx - pad);
                            for (i64 ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_data(const T* dy, const T* w, T* dx,
                          i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dxp = dx + ((n * Cin + ic) * H) * W;
            for (i64 i = 0; i < H * W; ++i) dxp[i] = T(0);
            for (i64 oc = 0; oc < Cout; ++oc) {
                const T* dyp = dy + ((n * Cout + oc) * H) * W;
                const T* wp = w + ((oc * Cin + ic) * K) * K;
                for (i64 ky = 0; ky < K; ++ky) {
                    for (i64 kx = 0; kx < K; ++kx) {
                        const T wv = wp[ky * K + kx];
                        // ix = ox + kx - pad  =>  dx[iy][ix] += w * dy[oy][ox]
                        const i64 iy0 = std::max<i64>(0, pad - ky);
                        const i64 iy1 = std::min<i64>(H, H + pad - ky);
                        const i64 ix0 = std::max<i64>(0, pad - kx);
                        const i64 ix1 = std::min<i64>(W, W + pad - kx);
                        for (i64 iy = iy0; iy < iy1; ++iy) {
                            T* dxrow = dxp + iy * W;
                            const T* dyrow = dyp + (iy + ky - pad) * W + (kx - pad);
                            for (i64 ix = ix0; ix < ix1; ++ix) dxrow[ix] += wv * dyrow[ix];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_weights(const T* x, const T* dy, T* dw, T* db,
                             i64 N, i64 Cin, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for schedule(static)
    for (i64 oc = 0; oc < Cout; ++oc) {
        T acc_b = T(0);
        for (i64 n = 0; n < N; ++n) {
            const T* dyp = dy + ((n * Cout + oc) * H) * W;
            for (i64 i = 0; i < H * W; ++i) acc_b += dyp[i];
        }
        if (db) db[oc] = acc_b;
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dwp = dw + ((oc * Cin + ic) * K) * K;
            for (i64 ky = 0; ky < K; ++ky) {
                for (i64 kx = 0; kx < K; ++kx) {
                    T acc = T(0);
                    for (i64 n = 0; n < N; ++n) {
                        const T* dyp = dy + ((n * Cout + oc) * H) * W;
                        const T* xp = x + ((n * Cin + ic) * H) * W;
                        const i64 oy0 = std::max<i64>(0, pad - ky);
                        const i64 oy1 = std::min<i64>(H, H + pad - ky);
                        const i64 ox0 = std::max<i64>(0, pad - kx);
                        const i64 ox1 = std::min<i64>(W, W + pad - kx);
                        for (i64 oy = oy0; oy < oy1; ++oy) {
                            const T* dyrow = dyp + oy * W;
                            const T* xrow = xp + (oy + ky - pad) * W + (kx - pad);
                            for (i64 ox = ox0; ox < ox1; ++ox) acc += dyrow[ox] * xrow[ox];
                        }
                    }
                    dwp[ky * K + kx] = acc;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 2D transposed convolution, kernel 2, stride 2 (each output pixel receives
// exactly one (ky,kx) contribution)
// ---------------------------------------------------------------------------

template <typename T>
void tconv2d_forward(const T* x, const T* w, const T* b, T* y,
                     i64 N, i64 Cin, i64 H, i64 W, i64 Cout) {
    const i64 OH = 2 * H, OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            T* yp = y + ((n * Cout + oc) * OH) * OW;
            const T bias = b ? b[oc] : T(0);
            for (i64 oy = 0; oy < OH; ++oy) {
                const i64 iy = oy >> 1, ky = oy & 1;
                T* yrow = yp + oy * OW;
                for (i64 ox = 0; ox < OW; ++ox) yrow[ox] = bias;
                for (i64 ic = 0; ic < Cin; ++ic) {
                    const T* xrow = x + ((n * Cin + ic) * H + iy) * W;
                    const T w0 = w[((ic * Cout + oc) * 2 + ky) * 2 + 0];
                    const T w1 = w[((ic * Cout + oc) * 2 + ky) * 2 + 1];
                    for (i64 ix = 0; ix < W; ++ix) {
                        const T v = xrow[ix];
                        yrow[2 * ix] += w0 * v;
                        yrow[2 * ix + 1] += w1 * v;
                    }
                }
            }
        }
    }
}

template <typename T>
void tconv2d_backward_data(const T* dy, const T* w, T* dx,
                           i64 N, i64 Cin, i64 H, i64 W, i64 Cout) {
    const i64 OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dxp = dx + ((n * Cin + ic) * H) * W;
            for (i64 iy = 0; iy < H; ++iy) {
                T* dxrow = dxp + iy * W;
                for (i64 ix = 0; ix < W; ++ix) dxrow[ix] = T(0);
                for (i64 oc = 0; oc < Cout; ++oc) {
                    const T* wp = w + ((ic * Cout + oc) * 2) * 2;
                    for (i64 ky = 0; ky < 2; ++ky) {
                        const T* dyrow = dy + ((n * Cout + oc) * 2 * H + (2 * iy + ky)) * OW;
                        const T w0 = wp[ky * 2 + 0], w1 = wp[ky * 2 + 1];
                        for (i64 ix = 0; ix < W; ++ix)
                            dxrow[ix] += w0 * dyrow[2 * ix] + w1 * dyrow[2 * ix + 1];
                    }
                }
            }
        }
    }
}

template <typename T>
void tconv2d_backward_weights(const T* x, const T* dy, T* dw, T* db,
                              i64 N, i64 Cin, i64 H, i64 W, i64 Cout) {
    const i64 OH = 2 * H, OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 ic = 0; ic < Cin; ++ic) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            for (i64 ky = 0; ky < 2; ++ky) {
                for (i64 kx = 0; kx < 2; ++kx) {
                    T acc = T(0);
                    for (i64 n = 0; n < N; ++n) {
                        const T* xp = x + ((n * Cin + ic) * H) * W;
                        const T* dyp = dy + ((n * Cout + oc) * OH) * OW;
                        for (i64 iy = 0; iy < H; ++iy) {
                            const T* xrow = xp + iy * W;
                            const T* dyrow = dyp + (2 * iy + ky) * OW + kx;
                            for (i64 ix = 0; ix < W; ++ix) acc += xrow[ix] * dyrow[2 * ix];
                        }
                    }
                    dw[((ic * Cout + oc) * 2 + ky) * 2 + kx] = acc;
                }
            }
        }
    }
    if (db) {
#pragma omp parallel for schedule(static)
        for (i64 oc = 0; oc < Cout; ++oc) {
            T acc = T(0);
            for (i64 n = 0; n < N; ++n) {
                const T* dyp = dy + ((n * Cout + oc) * OH) * OW;
                for (i64 i = 0; i < OH * OW; ++i) acc += dyp[i];
            }
            db[oc] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// 2x2 average pooling
// ---------------------------------------------------------------------------

template <typename T>
void avgpool2d_forward(const T* x, T* y, i64 N, i64 C, i64 H, i64 W) {
    const i64 OH = H / 2, OW = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 c = 0; c < C; ++c) {
            const T* xp = x + ((n * C + c) * H) * W;
            T* yp = y + ((n * C + c) * OH) * OW;
            for (i64 oy = 0; oy < OH; ++oy) {
                const T* r0 = xp + (2 * oy) * W;
                const T* r1 = xp + (2 * oy + 1) * W;
                T* yrow = yp + oy * OW;
                for (i64 ox = 0; ox < OW; ++ox)
                    yrow[ox] = (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) * T(0.25);
            }
        }
    }
}

template <typename T>
void avgpool2d_backward(const T* dy, T* dx, i64 N, i64 C, i64 H, i64 W) {
    const i64 OH = H / 2, OW = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 c = 0; c < C; ++c) {
            const T* dyp = dy + ((n * C + c) * OH) * OW;
            T* dxp = dx + ((n * C + c) * H) * W;
            for (i64 oy = 0; oy < OH; ++oy) {
                const T* dyrow = dyp + oy * OW;
                T* r0 = dxp + (2 * oy) * W;
                T* r1 = dxp + (2 * oy + 1) * W;
                for (i64 ox = 0; ox < OW; ++ox) {
                    const T g = dyrow[ox] * T(0.25);
                    r0[2 * ox] = g;
                    r0[2 * ox + 1] = g;
                    r1[2 * ox] = g;
                    r1[2 * ox + 1] = g;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 3D convolution / transposed convolution / pooling (config-gated rank-3
// support; same contracts as the 2D kernels)
// ---------------------------------------------------------------------------

template <typename T>
void conv3d_forward(const T* x, const T* w, const T* b, T* y,
                    i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            T* yp = y + ((n * Cout + oc) * D) * H * W;
            const T bias = b ? b[oc] : T(0);
            for (i64 i = 0; i < D * H * W; ++i) yp[i] = bias;
            for (i64 ic = 0; ic < Cin; ++ic) {
                const T* xp = x + ((n * Cin + ic) * D) * H * W;
                const T* wp = w + ((oc * Cin + ic) * K) * K * K;
                for (i64 kz = 0; kz < K; ++kz)
                    for (i64 ky = 0; ky < K; ++ky)
                        for (i64 kx = 0; kx < K; ++kx) {
                            const T wv = wp[(kz * K + ky) * K + kx];
                            const i64 oz0 = std::max<i64>(0, pad - kz), oz1 = std::min<i64>(D, D + pad - kz);
                            const i64 oy0 = std::max<i64>(0, pad - ky), oy1 = std::min<i64>(H, H + pad - ky);
                            const i64 ox0 = std::max<i64>(0, pad - kx), ox1 = std::min<i64>(W, W + pad - kx);
                            for (i64 oz = oz0; oz < oz1; ++oz)
                                for (i64 oy = oy0; oy < oy1; ++oy) {
                                    T* yrow = yp + (oz * H + oy) * W;
                                    const T* xrow = xp + ((oz + kz - pad) * H + (oy + ky - pad)) * W + (kx - pad);
                                    for (i64 ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox];
                                }
                        }
            }
        }
    }
}

template <typename T>
void conv3d_backward_data(const T* dy, const T* w, T* dx,
                          i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dxp = dx + ((n * Cin + ic) * D) * H * W;
            for (i64 i = 0; i < D * H * W; ++i) dxp[i] = T(0);
            for (i64 oc = 0; oc < Cout; ++oc) {
                const T* dyp = dy + ((n * Cout + oc) * D) * H * W;
                const T* wp = w + ((oc * Cin + ic) * K) * K * K;
                for (i64 kz = 0; kz < K; ++kz)
                    for (i64 ky = 0; ky < K; ++ky)
                        for (i64 kx = 0; kx < K; ++kx) {
                            const T wv = wp[(kz * K + ky) * K + kx];
                            const i64 iz0 = std::max<i64>(0, pad - kz), iz1 = std::min<i64>(D, D + pad - kz);
                            const i64 iy0 = std::max<i64>(0, pad - ky), iy1 = std::min<i64>(H, H + pad - ky);
                            const i64 ix0 = std::max<i64>(0, pad - kx), ix1 = std::min<i64>(W, W + pad - kx);
                            for (i64 iz = iz0; iz < iz1; ++iz)
                                for (i64 iy = iy0; iy < iy1; ++iy) {
                                    T* dxrow = dxp + (iz * H + iy) * W;
                                    const T* dyrow = dyp + ((iz + kz - pad) * H + (iy + ky - pad)) * W + (kx - pad);
                                    for (i64 ix = ix0; ix < ix1; ++ix) dxrow[ix] += wv * dyrow[ix];
                                }
                        }
            }
        }
    }
}

template <typename T>
void conv3d_backward_weights(const T* x, const T* dy, T* dw, T* db,
                             i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout, i64 K, i64 pad) {
#pragma omp parallel for schedule(static)
    for (i64 oc = 0; oc < Cout; ++oc) {
        T acc_b = T(0);
        for (i64 n = 0; n < N; ++n) {
            const T* dyp = dy + ((n * Cout + oc) * D) * H * W;
            for (i64 i = 0; i < D * H * W; ++i) acc_b += dyp[i];
        }
        if (db) db[oc] = acc_b;
        for (i64 ic = 0; ic < Cin; ++ic)
            for (i64 kz = 0; kz < K; ++kz)
                for (i64 ky = 0; ky < K; ++ky)
                    for (i64 kx = 0; kx < K; ++kx) {
                        T acc = T(0);
                        for (i64 n = 0; n < N; ++n) {
                            const T* dyp = dy + ((n * Cout + oc) * D) * H * W;
                            const T* xp = x + ((n * Cin + ic) * D) * H * W;
                            const i64 oz0 = std::max<i64>(0, pad - kz), oz1 = std::min<i64>(D, D + pad - kz);
                            const i64 oy0 = std::max<i64>(0, pad - ky), oy1 = std::min<i64>(H, H + pad - ky);
                            const i64 ox0 = std::max<i64>(0, pad - kx), ox1 = std::min<i64>(W, W + pad - kx);
                            for (i64 oz = oz0; oz < oz1; ++oz)
                                for (i64 oy = oy0; oy < oy1; ++oy) {
                                    const T* dyrow = dyp + (oz * H + oy) * W;
                                    const T* xrow = xp + ((oz + kz - pad) * H + (oy + ky - pad)) * W + (kx - pad);
                                    for (i64 ox = ox0; ox < ox1; ++ox) acc += dyrow[ox] * xrow[ox];
                                }
                        }
                        dw[(((oc * Cin + ic) * K + kz) * K + ky) * K + kx] = acc;
                    }
    }
}

template <typename T>
void tconv3d_forward(const T* x, const T* w, const T* b, T* y,
                     i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout) {
    const i64 OD = 2 * D, OH = 2 * H, OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            T* yp = y + ((n * Cout + oc) * OD) * OH * OW;
            const T bias = b ? b[oc] : T(0);
            for (i64 oz = 0; oz < OD; ++oz) {
                const i64 iz = oz >> 1, kz = oz & 1;
                for (i64 oy = 0; oy < OH; ++oy) {
                    const i64 iy = oy >> 1, ky = oy & 1;
                    T* yrow = yp + (oz * OH + oy) * OW;
                    for (i64 ox = 0; ox < OW; ++ox) yrow[ox] = bias;
                    for (i64 ic = 0; ic < Cin; ++ic) {
                        const T* xrow = x + (((n * Cin + ic) * D + iz) * H + iy) * W;
                        const T* wp = w + (((ic * Cout + oc) * 2 + kz) * 2 + ky) * 2;
                        for (i64 ix = 0; ix < W; ++ix) {
                            const T v = xrow[ix];
                            yrow[2 * ix] += wp[0] * v;
                            yrow[2 * ix + 1] += wp[1] * v;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void tconv3d_backward_data(const T* dy, const T* w, T* dx,
                           i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout) {
    const i64 OH = 2 * H, OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 ic = 0; ic < Cin; ++ic) {
            T* dxp = dx + ((n * Cin + ic) * D) * H * W;
            for (i64 iz = 0; iz < D; ++iz)
                for (i64 iy = 0; iy < H; ++iy) {
                    T* dxrow = dxp + (iz * H + iy) * W;
                    for (i64 ix = 0; ix < W; ++ix) dxrow[ix] = T(0);
                    for (i64 oc = 0; oc < Cout; ++oc) {
                        const T* wp = w + ((ic * Cout + oc) * 2) * 4;
                        for (i64 kz = 0; kz < 2; ++kz)
                            for (i64 ky = 0; ky < 2; ++ky) {
                                const T* dyrow = dy + (((n * Cout + oc) * 2 * D + (2 * iz + kz)) * OH +
                                                       (2 * iy + ky)) * OW;
                                const T w0 = wp[(kz * 2 + ky) * 2 + 0], w1 = wp[(kz * 2 + ky) * 2 + 1];
                                for (i64 ix = 0; ix < W; ++ix)
                                    dxrow[ix] += w0 * dyrow[2 * ix] + w1 * dyrow[2 * ix + 1];
                            }
                    }
                }
        }
    }
}

template <typename T>
void tconv3d_backward_weights(const T* x, const T* dy, T* dw, T* db,
                              i64 N, i64 Cin, i64 D, i64 H, i64 W, i64 Cout) {
    const i64 OD = 2 * D, OH = 2 * H, OW = 2 * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 ic = 0; ic < Cin; ++ic) {
        for (i64 oc = 0; oc < Cout; ++oc) {
            for (i64 kz = 0; kz < 2; ++kz)
                for (i64 ky = 0; ky < 2; ++ky)
                    for (i64 kx = 0; kx < 2; ++kx) {
                        T acc = T(0);
                        for (i64 n = 0; n < N; ++n) {
                            const T* xp = x + ((n * Cin + ic) * D) * H * W;
                            const T* dyp = dy + ((n * Cout + oc) * OD) * OH * OW;
                            for (i64 iz = 0; iz < D; ++iz)
                                for (i64 iy = 0; iy < H; ++iy) {
                                    const T* xrow = xp + (iz * H + iy) * W;
                                    const T* dyrow = dyp + ((2 * iz + kz) * OH + (2 * iy + ky)) * OW + kx;
                                    for (i64 ix = 0; ix < W; ++ix) acc += xrow[ix] * dyrow[2 * ix];
                                }
                        }
                        dw[(((ic * Cout + oc) * 2 + kz) * 2 + ky) * 2 + kx] = acc;
                    }
        }
    }
    if (db) {
#pragma omp parallel for schedule(static)
        for (i64 oc = 0; oc < Cout; ++oc) {
            T acc = T(0);
            for (i64 n = 0; n < N; ++n) {
                const T* dyp = dy + ((n * Cout + oc) * OD) * OH * OW;
                for (i64 i = 0; i < OD * OH * OW; ++i) acc += dyp[i];
            }
            db[oc] = acc;
        }
    }
}

template <typename T>
void avgpool3d_forward(const T* x, T* y, i64 N, i64 C, i64 D, i64 H, i64 W) {
    const i64 OD = D / 2, OH = H / 2, OW = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 c = 0; c < C; ++c) {
            const T* xp = x + ((n * C + c) * D) * H * W;
            T* yp = y + ((n * C + c) * OD) * OH * OW;
            for (i64 oz = 0; oz < OD; ++oz)
                for (i64 oy = 0; oy < OH; ++oy) {
                    T* yrow = yp + (oz * OH + oy) * OW;
                    const T* r00 = xp + ((2 * oz) * H + 2 * oy) * W;
                    const T* r01 = xp + ((2 * oz) * H + 2 * oy + 1) * W;
                    const T* r10 = xp + ((2 * oz + 1) * H + 2 * oy) * W;
                    const T* r11 = xp + ((2 * oz + 1) * H + 2 * oy + 1) * W;
                    for (i64 ox = 0; ox < OW; ++ox)
                        yrow[ox] = (r00[2 * ox] + r00[2 * ox + 1] + r01[2 * ox] + r01[2 * ox + 1] +
                                    r10[2 * ox] + r10[2 * ox + 1] + r11[2 * ox] + r11[2 * ox + 1]) * T(0.125);
                }
        }
    }
}

template <typename T>
void avgpool3d_backward(const T* dy, T* dx, i64 N, i64 C, i64 D, i64 H, i64 W) {
    const i64 OD = D / 2, OH = H / 2, OW = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 c = 0; c < C; ++c) {
            const T* dyp = dy + ((n * C + c) * OD) * OH * OW;
            T* dxp = dx + ((n * C + c) * D) * H * W;
            for (i64 oz = 0; oz < OD; ++oz)
                for (i64 oy = 0; oy < OH; ++oy) {
                    const T* dyrow = dyp + (oz * OH + oy) * OW;
                    for (i64 ox = 0; ox < OW; ++ox) {
                        const T g = dyrow[ox] * T(0.125);
                        for (i64 dz = 0; dz < 2; ++dz)
                            for (i64 dyy = 0; dyy < 2; ++dyy)
                                for (i64 dxx = 0; dxx < 2; ++dxx)
                                    dxp[((2 * oz + dz) * H + 2 * oy + dyy) * W + 2 * ox + dxx] = g;
                    }
                }
        }
    }
}

// ---------------------------------------------------------------------------
// Group normalization over (N, C, spatial); statistics accumulate in double
// ---------------------------------------------------------------------------

template <typename T>
void groupnorm_forward(const T* x, const T* gamma, const T* beta, T* y,
                       T* save_mean, T* save_rstd,
                       i64 N, i64 C, i64 spatial, i64 groups, double eps) {
    const i64 cpg = C / groups;
    const i64 gsize = cpg * spatial;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 g = 0; g < groups; ++g) {
            const T* xg = x + (n * C + g * cpg) * spatial;
            double s = 0.0, s2 = 0.0;
            for (i64 i = 0; i < gsize; ++i) {
                const double v = static_cast<double>(xg[i]);
                s += v;
                s2 += v * v;
            }
            const double mean = s / static_cast<double>(gsize);
            const double var = std::max(0.0, s2 / static_cast<double>(gsize) - mean * mean);
            const double rstd = 1.0 / std::sqrt(var + eps);
            save_mean[n * groups + g] = static_cast<T>(mean);
            save_rstd[n * groups + g] = static_cast<T>(rstd);
            for (i64 c = 0; c < cpg; ++c) {
                const T ga = gamma[g * cpg + c], be = beta[g * cpg + c];
                const T* xr = xg + c * spatial;
                T* yr = y + (n * C + g * cpg + c) * spatial;
                const T a = static_cast<T>(rstd) * ga;
                const T bb = be - static_cast<T>(mean) * a;
                for (i64 i = 0; i < spatial; ++i) yr[i] = a * xr[i] + bb;
            }
        }
    }
}

template <typename T>
void groupnorm_backward(const T* dy, const T* x, const T* gamma,
                        const T* save_mean, const T* save_rstd,
                        T* dx, T* dgamma, T* dbeta,
                        i64 N, i64 C, i64 spatial, i64 groups) {
    const i64 cpg = C / groups;
    const i64 gsize = cpg * spatial;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < N; ++n) {
        for (i64 g = 0; g < groups; ++g) {
            const double mean = static_cast<double>(save_mean[n * groups + g]);
            const double rstd = static_cast<double>(save_rstd[n * groups + g]);
            double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
            for (i64 c = 0; c < cpg; ++c) {
                const double ga = static_cast<double>(gamma[g * cpg + c]);
                const T* dyr = dy + (n * C + g * cpg + c) * spatial;
                const T* xr = x + (n * C + g * cpg + c) * spatial;
                for (i64 i = 0; i < spatial; ++i) {
                    const double dxhat = static_cast<double>(dyr[i]) * ga;
                    const double xhat = (static_cast<double>(xr[i]) - mean) * rstd;
                    m1 += dxhat;
                    m2 += dxhat * xhat;
                }
            }
            m1 /= static_cast<double>(gsize);
            m2 /= static_cast<double>(gsize);
            for (i64 c = 0; c < cpg; ++c) {
                const double ga = static_cast<double>(gamma[g * cpg + c]);
                const T* dyr = dy + (n * C + g * cpg + c) * spatial;
                const T* xr = x + (n * C + g * cpg + c) * spatial;
                T* dxr = dx + (n * C + g * cpg + c) * spatial;
                for (i64 i = 0; i < spatial; ++i) {
                    const double dxhat = static_cast<double>(dyr[i]) * ga;
                    const double xhat = (static_cast<double>(xr[i]) - mean) * rstd;
                    dxr[i] = static_cast<T>(rstd * (dxhat - m1 - xhat * m2));
                }
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (i64 c = 0; c < C; ++c) {
        const i64 g = c / cpg;
        double dgam = 0.0, dbet = 0.0;
        for (i64 n = 0; n < N; ++n) {
            const double mean = static_cast<double>(save_mean[n * groups + g]);
            const double rstd = static_cast<double>(save_rstd[n * groups + g]);
            const T* dyr = dy + (n * C + c) * spatial;
            const T* xr = x + (n * C + c) * spatial;
            for (i64 i = 0; i < spatial; ++i) {
                const double xhat = (static_cast<double>(xr[i]) - mean) * rstd;
                dgam += static_cast<double>(dyr[i]) * xhat;
                dbet += static_cast<double>(dyr[i]);
            }
        }
        dgamma[c] = static_cast<T>(dgam);
        dbeta[c] = static_cast<T>(dbet);
    }
}

// ---------------------------------------------------------------------------
// Swish (x * sigmoid(x))
// ---------------------------------------------------------------------------

template <typename T>
void swish_forward(const T* x, T* y, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <typename T>
void swish_backward(const T* dy, const T* x, T* dx, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        dx[i] = dy[i] * (s * (T(1) + x[i] * (T(1) - s)));
    }
}

// ---------------------------------------------------------------------------
// Bilinear / trilinear upsampling to an arbitrary target shape
// (align-corners-false: source cell centers map uniformly into the target)
// ---------------------------------------------------------------------------

template <typename T>
inline void upsample_axis_weights(i64 src, i64 dst, i64 o, i64& i0, i64& i1, T& w1) {
    const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(src) /
                         static_cast<double>(dst) - 0.5;
    double f = std::floor(s);
    i0 = static_cast<i64>(f);
    i1 = i0 + 1;
    w1 = static_cast<T>(s - f);
    if (i0 < 0) { i0 = 0; i1 = 0; w1 = T(0); }
    if (i1 >= src) { i1 = src - 1; if (i0 >= src) i0 = src - 1; }
}

template <typename T>
void upsample_bilinear(const T* src, i64 sh, i64 sw, T* dst, i64 dh, i64 dw) {
#pragma omp parallel for schedule(static)
    for (i64 oy = 0; oy < dh; ++oy) {
        i64 y0, y1;
        T fy;
        upsample_axis_weights<T>(sh, dh, oy, y0, y1, fy);
        for (i64 ox = 0; ox < dw; ++ox) {
            i64 x0, x1;
            T fx;
            upsample_axis_weights<T>(sw, dw, ox, x0, x1, fx);
            const T v00 = src[y0 * sw + x0], v01 = src[y0 * sw + x1];
            const T v10 = src[y1 * sw + x0], v11 = src[y1 * sw + x1];
            dst[oy * dw + ox] = (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) +
                                fy * ((T(1) - fx) * v10 + fx * v11);
        }
    }
}

template <typename T>
void upsample_trilinear(const T* src, i64 sd, i64 sh, i64 sw, T* dst, i64 dd, i64 dh, i64 dw) {
#pragma omp parallel for schedule(static)
    for (i64 oz = 0; oz < dd; ++oz) {
        i64 z0, z1;
        T fz;
        upsample_axis_weights<T>(sd, dd, oz, z0, z1, fz);
        for (i64 oy = 0; oy < dh; ++oy) {
            i64 y0, y1;
            T fy;
            upsample_axis_weights<T>(sh, dh, oy, y0, y1, fy);
            for (i64 ox = 0; ox < dw; ++ox) {
                i64 x0, x1;
                T fx;
                upsample_axis_weights<T>(sw, dw, ox, x0, x1, fx);
                auto at = [&](i64 z, i64 y, i64 x) { return src[(z * sh + y) * sw + x]; };
                const T c00 = (T(1) - fx) * at(z0, y0, x0) + fx * at(z0, y0, x1);
                const T c01 = (T(1) - fx) * at(z0, y1, x0) + fx * at(z0, y1, x1);
                const T c10 = (T(1) - fx) * at(z1, y0, x0) + fx * at(z1, y0, x1);
                const T c11 = (T(1) - fx) * at(z1, y1, x0) + fx * at(z1, y1, x1);
                dst[(oz * dh + oy) * dw + ox] =
                    (T(1) - fz) * ((T(1) - fy) * c00 + fy * c01) + fz * ((T(1) - fy) * c10 + fy * c11);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Median filter, odd k, edge-replicated borders
// ---------------------------------------------------------------------------

template <typename T>
void median_filter2d(const T* src, T* dst, i64 H, i64 W, i64 k) {
    const i64 r = k / 2;
#pragma omp parallel
    {
        std::vector<T> buf(static_cast<std::size_t>(k * k));
#pragma omp for schedule(static)
        for (i64 y = 0; y < H; ++y) {
            for (i64 x = 0; x < W; ++x) {
                std::size_t m = 0;
                for (i64 dy = -r; dy <= r; ++dy) {
                    const i64 sy = std::clamp<i64>(y + dy, 0, H - 1);
                    for (i64 dx = -r; dx <= r; ++dx) {
                        const i64 sx = std::clamp<i64>(x + dx, 0, W - 1);
                        buf[m++] = src[sy * W + sx];
                    }
                }
                std::nth_element(buf.begin(), buf.begin() + (k * k) / 2, buf.end());
                dst[y * W + x] = buf[static_cast<std::size_t>((k * k) / 2)];
            }
        }
    }
}

template <typename T>
void median_filter3d(const T* src, T* dst, i64 D, i64 H, i64 W, i64 k) {
    const i64 r = k / 2;
#pragma omp parallel
    {
        std::vector<T> buf(static_cast<std::size_t>(k * k * k));
#pragma omp for collapse(2) schedule(static)
        for (i64 z = 0; z < D; ++z) {
            for (i64 y = 0; y < H; ++y) {
                for (i64 x = 0; x < W; ++x) {
                    std::size_t m = 0;
                    for (i64 dz = -r; dz <= r; ++dz) {
                        const i64 sz = std::clamp<i64>(z + dz, 0, D - 1);
                        for (i64 dy = -r; dy <= r; ++dy) {
                            const i64 sy = std::clamp<i64>(y + dy, 0, H - 1);
                            for (i64 dx = -r; dx <= r; ++dx) {
                                const i64 sx = std::clamp<i64>(x + dx, 0, W - 1);
                                buf[m++] = src[(sz * H + sy) * W + sx];
                            }
                        }
                    }
                    std::nth_element(buf.begin(), buf.begin() + (k * k * k) / 2, buf.end());
                    dst[(z * H + y) * W + x] = buf[static_cast<std::size_t>((k * k * k) / 2)];
                }
            }
        }
    }
}

}  // namespace nad::kern

#endif
