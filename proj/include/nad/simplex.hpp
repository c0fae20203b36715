#ifndef NAD_SIMPLEX_HPP
#define NAD_SIMPLEX_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "nad/rng.hpp"

namespace nad::noise {

/// Seeded 2D/3D simplex noise (Gustavson's variant). Raw values are
/// bounded in [-1, 1]; the permutation table is a seeded Fisher-Yates
/// shuffle so fields are reproducible from the seed alone.
class Simplex {
public:
    explicit Simplex(std::uint64_t seed) {
        for (int i = 0; i < 256; ++i) perm_[i] = static_cast<std::uint8_t>(i);
        Rng rng(seed);
        for (int i = 255; i > 0; --i) {
            const auto j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
            std::swap(perm_[i], perm_[j]);
        }
        for (int i = 0; i < 256; ++i) perm_[256 + i] = perm_[i];
    }

    double eval2(double xin, double yin) const {
        static constexpr double F2 = 0.36602540378443864676;  // (sqrt(3)-1)/2
        static constexpr double G2 = 0.21132486540518711775;  // (3-sqrt(3))/6
        const double s = (xin + yin) * F2;
        const int i = fastfloor(xin + s);
        const int j = fastfloor(yin + s);
        const double t = (i + j) * G2;
        const double x0 = xin - (i - t);
        const double y0 = yin - (j - t);
        const int i1 = x0 > y0 ? 1 : 0;
        const int j1 = x0 > y0 ? 0 : 1;
        const double x1 = x0 - i1 + G2;
        const double y1 = y0 - j1 + G2;
        const double x2 = x0 - 1.0 + 2.0 * G2;
        const double y2 = y0 - 1.0 + 2.0 * G2;
        const int ii = i & 255;
        const int jj = j & 255;
        double n = 0.0;
        n += corner2(x0, y0, perm_[ii + perm_[jj]] % 12);
        n += corner2(x1, y1, perm_[ii + i1 + perm_[jj + j1]] % 12);
        n += corner2(x2, y2, perm_[ii + 1 + perm_[jj + 1]] % 12);
        return 70.0 * n;
    }

    double eval3(double xin, double yin, double zin) const {
        static constexpr double F3 = 1.0 / 3.0;
        static constexpr double G3 = 1.0 / 6.0;
        const double s = (xin + yin + zin) * F3;
        const int i = fastfloor(xin + s);
        const int j = fastfloor(yin + s);
        const int k = fastfloor(zin + s);
        const double t = (i + j + k) * G3;
        const double x0 = xin - (i - t);
        const double y0 = yin - (j - t);
        const double z0 = zin - (k - t);
        int i1, j1, k1, i2, j2, k2;
        if (x0 >= y0) {
            if (y0 >= z0)      { i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 1; k2 = 0; }
            else if (x0 >= z0) { i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 0; k2 = 1; }
            else               { i1 = 0; j1 = 0; k1 = 1; i2 = 1; j2 = 0; k2 = 1; }
        } else {
            if (y0 < z0)       { i1 = 0; j1 = 0; k1 = 1; i2 = 0; j2 = 1; k2 = 1; }
            else if (x0 < z0)  { i1 = 0; j1 = 1; k1 = 0; i2 = 0; j2 = 1; k2 = 1; }
            else               { i1 = 0; j1 = 1; k1 = 0; i2 = 1; j2 = 1; k2 = 0; }
        }
        const double x1 = x0 - i1 + G3, y1 = y0 - j1 + G3, z1 = z0 - k1 + G3;
        const double x2 = x0 - i2 + 2.0 * G3, y2 = y0 - j2 + 2.0 * G3, z2 = z0 - k2 + 2.0 * G3;
        const double x3 = x0 - 1.0 + 3.0 * G3, y3 = y0 - 1.0 + 3.0 * G3, z3 = z0 - 1.0 + 3.0 * G3;
        const int ii = i & 255, jj = j & 255, kk = k & 255;
        double n = 0.0;
        n += corner3(x0, y0, z0, perm_[ii + perm_[jj + perm_[kk]]] % 12);
        n += corner3(x1, y1, z1, perm_[ii + i1 + perm_[jj + j1 + perm_[kk + k1]]] % 12);
        n += corner3(x2, y2, z2, perm_[ii + i2 + perm_[jj + j2 + perm_[kk + k2]]] % 12);
        n += corner3(x3, y3, z3, perm_[ii + 1 + perm_[jj + 1 + perm_[kk + 1]]] % 12);
        return 32.0 * n;
    }

private:
    static int fastfloor(double x) {
        const int xi = static_cast<int>(x);
        return x < xi ? xi - 1 : xi;
    }

    static constexpr std::array<std::array<double, 3>, 12> kGrad3{{
        {1, 1, 0}, {-1, 1, 0}, {1, -1, 0}, {-1, -1, 0},
        {1, 0, 1}, {-1, 0, 1}, {1, 0, -1}, {-1, 0, -1},
        {0, 1, 1}, {0, -1, 1}, {0, 1, -1}, {0, -1, -1}}};

    static double corner2(double x, double y, int gi) {
        double t = 0.5 - x * x - y * y;
        if (t < 0) return 0.0;
        t *= t;
        return t * t * (kGrad3[gi][0] * x + kGrad3[gi][1] * y);
    }

    static double corner3(double x, double y, double z, int gi) {
        double t = 0.6 - x * x - y * y - z * z;
        if (t < 0) return 0.0;
        t *= t;
        return t * t * (kGrad3[gi][0] * x + kGrad3[gi][1] * y + kGrad3[gi][2] * z);
    }

    std::uint8_t perm_[512];
};

}  // namespace nad::noise

#endif
