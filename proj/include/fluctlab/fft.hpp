#pragma once

// Small self-contained DFT engine. Power-of-two sizes go through an
// iterative radix-2 FFT; any other size falls back to the naive O(M^2)
// transform (grids here are tiny, so the fallback is only a convenience
// for odd test grids).

#include <cmath>
#include <vector>

#include "common.hpp"

namespace fluctlab::fft {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

// In-place radix-2, sign = +1 for exp(+2*pi*i*jk/M) kernel.
inline void fft_pow2(cplx* a, std::size_t n, int sign) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * two_pi / static_cast<double>(len);
        cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j];
                cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline void dft_naive(cplx* a, std::size_t n, int sign) {
    std::vector<cplx> out(n, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            double ang = sign * two_pi * static_cast<double>(j * k % n) / static_cast<double>(n);
            out[k] += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
    }
    for (std::size_t k = 0; k < n; ++k) a[k] = out[k];
}

}  // namespace detail

// Unnormalized transform along one stride-1 contiguous line.
inline void transform_line(cplx* a, std::size_t n, int sign) {
    if (n == 1) return;
    if (is_pow2(n))
        detail::fft_pow2(a, n, sign);
    else
        detail::dft_naive(a, n, sign);
}

// Transform every axis of a d-dimensional M^d array (row-major, last axis
// fastest). Unnormalized.
inline void transform_nd(std::vector<cplx>& a, int d, std::size_t M, int sign) {
    std::vector<cplx> line(M);
    std::size_t total = a.size();
    for (int axis = d - 1; axis >= 0; --axis) {
        std::size_t stride = 1;
        for (int ax = axis + 1; ax < d; ++ax) stride *= M;
        std::size_t block = stride * M;
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                if (stride == 1) {
                    transform_line(&a[base], M, sign);
                } else {
                    for (std::size_t j = 0; j < M; ++j) line[j] = a[base + off + j * stride];
                    transform_line(line.data(), M, sign);
                    for (std::size_t j = 0; j < M; ++j) a[base + off + j * stride] = line[j];
                }
            }
        }
    }
}

}  // namespace fluctlab::fft
