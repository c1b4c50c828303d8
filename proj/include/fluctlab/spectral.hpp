#pragma once

// Fourier representation of functions and distributions on the torus.
//
// A SpectralField stores one complex coefficient per lattice index
// k in {-kmax..kmax}^d with the convention
//
//     c_k(f) = integral of exp(-2*pi*i*k.x) df(x),
//
// i.e. f acting on e_{-k}. Real-valued fields then satisfy the Hermitian
// symmetry c_{-k} = conj(c_k), and the empirical measure of a point cloud
// embeds as a plain complex-exponential sum. Sobolev inner products of
// index s are weighted coefficient sums over the truncated lattice.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"
#include "fft.hpp"

namespace fluctlab {

struct SobolevIndices {
    int d = 1;
    double lambda = 2.0;
    double lambda_prime = 3.5;

    SobolevIndices() = default;
    SobolevIndices(int dim, double lam, double lam_prime)
        : d(dim), lambda(lam), lambda_prime(lam_prime) {
        if (d < 1 || d > 3) throw domain_error("SobolevIndices: d must be 1, 2 or 3");
        if (!(lambda > 1.5 * d))
            throw domain_error("SobolevIndices: lambda > 1.5*d required, got lambda=" +
                               std::to_string(lambda) + " with d=" + std::to_string(d));
        if (!(lambda_prime > lambda + 1.0))
            throw domain_error("SobolevIndices: lambda_prime > lambda + 1 required");
    }

    // Index of the fluctuation space H^{-lambda-2}.
    double s_fluct() const { return -(lambda + 2.0); }
};

class SpectralField {
  public:
    SpectralField() = default;
    SpectralField(int d, int kmax)
        : d_(d), kmax_(kmax), n_(2 * kmax + 1) {
        if (d < 1 || d > 3) throw domain_error("SpectralField: d must be 1, 2 or 3");
        if (kmax < 0) throw domain_error("SpectralField: kmax must be >= 0");
        std::size_t total = 1;
        for (int a = 0; a < d_; ++a) total *= static_cast<std::size_t>(n_);
        c_.assign(total, cplx(0, 0));
    }

    int dim() const { return d_; }
    int kmax() const { return kmax_; }
    int modes_per_axis() const { return n_; }
    std::size_t size() const { return c_.size(); }

    bool same_lattice(const SpectralField& other) const {
        return d_ == other.d_ && kmax_ == other.kmax_;
    }

    std::size_t flat(const ivec& k) const {
        std::size_t idx = 0;
        for (int a = 0; a < d_; ++a) {
            int q = k[a] + kmax_;
            if (q < 0 || q >= n_) throw index_error("SpectralField: mode " + ivec_str(k, d_) + " outside lattice");
            idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(q);
        }
        return idx;
    }

    ivec unflat(std::size_t idx) const {
        ivec k{0, 0, 0};
        for (int a = d_ - 1; a >= 0; --a) {
            k[a] = static_cast<int>(idx % static_cast<std::size_t>(n_)) - kmax_;
            idx /= static_cast<std::size_t>(n_);
        }
        return k;
    }

    bool in_lattice(const ivec& k) const {
        for (int a = 0; a < d_; ++a)
            if (k[a] < -kmax_ || k[a] > kmax_) return false;
        return true;
    }

    cplx& at(const ivec& k) { return c_[flat(k)]; }
    const cplx& at(const ivec& k) const { return c_[flat(k)]; }
    cplx get_or_zero(const ivec& k) const { return in_lattice(k) ? c_[flat(k)] : cplx(0, 0); }

    cplx& operator[](std::size_t i) { return c_[i]; }
    const cplx& operator[](std::size_t i) const { return c_[i]; }

    std::vector<cplx>& coeffs() { return c_; }
    const std::vector<cplx>& coeffs() const { return c_; }

    template <class Fn>
    void for_each_mode(Fn&& fn) const {
        ivec k{-kmax_, d_ > 1 ? -kmax_ : 0, d_ > 2 ? -kmax_ : 0};
        for (std::size_t i = 0; i < c_.size(); ++i) {
            fn(i, k);
            for (int a = d_ - 1; a >= 0; --a) {
                if (++k[a] <= kmax_) break;
                k[a] = -kmax_;
            }
        }
    }

    // max |c_{-k} - conj(c_k)|; zero for real-valued fields.
    double hermitian_defect() const {
        double worst = 0;
        for (std::size_t i = 0; i < c_.size(); ++i) {
            ivec k = unflat(i);
            ivec mk{-k[0], -k[1], -k[2]};
            worst = std::max(worst, std::abs(c_[flat(mk)] - std::conj(c_[i])));
        }
        return worst;
    }

    // Pointwise evaluation sum_k c_k exp(2*pi*i*k.x). O(modes) per call.
    cplx eval(const rvec& x) const {
        // separable phase tables per axis
        std::array<std::vector<cplx>, 3> ph;
        for (int a = 0; a < d_; ++a) {
            ph[a].resize(static_cast<std::size_t>(n_));
            cplx w = std::polar(1.0, two_pi * x[a]);
            cplx cur = std::polar(1.0, -two_pi * x[a] * kmax_);
            for (int q = 0; q < n_; ++q) {
                ph[a][static_cast<std::size_t>(q)] = cur;
                cur *= w;
            }
        }
        cplx s(0, 0);
        for (std::size_t i = 0; i < c_.size(); ++i) {
            ivec k = unflat(i);
            cplx p = ph[0][static_cast<std::size_t>(k[0] + kmax_)];
            for (int a = 1; a < d_; ++a) p *= ph[a][static_cast<std::size_t>(k[a] + kmax_)];
            s += c_[i] * p;
        }
        return s;
    }

    double eval_real(const rvec& x) const { return eval(x).real(); }

    SpectralField& operator+=(const SpectralField& o) {
        require_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& o) {
        require_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    SpectralField& operator*=(cplx a) {
        for (auto& v : c_) v *= a;
        return *this;
    }

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

    void require_same(const SpectralField& o) const {
        if (!same_lattice(o)) throw shape_error("SpectralField: mismatched lattice shapes");
    }

  private:
    int d_ = 1;
    int kmax_ = 0;
    int n_ = 1;
    std::vector<cplx> c_;
};

// ---------------------------------------------------------------------------
// Sobolev pairings

// <f,g>_{H^s} = sum_k <k>^{2s} c_k(f) conj(c_k(g)) over the truncated lattice.
inline cplx sobolev_inner(const SpectralField& f, const SpectralField& g, double s) {
    f.require_same(g);
    cplx acc(0, 0);
    f.for_each_mode([&](std::size_t i, const ivec& k) {
        acc += std::pow(bracket2(k, f.dim()), s) * f[i] * std::conj(g[i]);
    });
    return acc;
}

inline double sobolev_norm(const SpectralField& f, double s) {
    return std::sqrt(std::max(0.0, sobolev_inner(f, f, s).real()));
}

// Dual pairing <f, phi> = integral of phi df = sum_k c_k(f) c_{-k}(phi).
inline cplx dual_pair(const SpectralField& f, const SpectralField& phi) {
    f.require_same(phi);
    cplx acc(0, 0);
    f.for_each_mode([&](std::size_t i, const ivec& k) {
        ivec mk{-k[0], -k[1], -k[2]};
        acc += f[i] * phi.at(mk);
    });
    return acc;
}

// ---------------------------------------------------------------------------
// Mollifier j_n

// Bump profile: 1 on [0,1/2], smooth monotone decay on (1/2,1), 0 beyond.
// The plateau makes j_n act as the exact identity on bandlimited fields once
// n >= 2*kmax*sqrt(d), which the truncation-consistency checks rely on.
inline double bump_profile(double r) {
    r = std::abs(r);
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    auto h = [](double u) { return u > 0 ? std::exp(-1.0 / u) : 0.0; };
    double a = h(2.0 * (1.0 - r));      // ->0 as r->1
    double b = h(2.0 * (r - 0.5));      // ->0 as r->1/2
    return a / (a + b);
}

// j_n * f: multiply c_k by jtilde(|k|/n); modes with |k| >= n are zeroed.
inline SpectralField mollify(const SpectralField& f, int n) {
    if (n < 1) throw domain_error("mollify: n >= 1 required");
    SpectralField out = f;
    out.for_each_mode([&](std::size_t i, const ivec& k) {
        double r = std::sqrt(static_cast<double>(inorm2(k, f.dim()))) / static_cast<double>(n);
        out[i] = f[i] * bump_profile(r);
    });
    return out;
}

// Smallest n for which j_n is the identity on the kmax lattice.
inline int mollifier_identity_level(int kmax, int d) {
    return static_cast<int>(std::ceil(2.0 * kmax * std::sqrt(static_cast<double>(d)))) + 1;
}

// ---------------------------------------------------------------------------
// Empirical embedding

// c_k = (1/N) sum_i exp(-2*pi*i*k.X_i); c_0 = 1 exactly.
inline SpectralField embed_empirical(const std::vector<rvec>& points, int d, int kmax) {
    if (points.empty()) throw domain_error("embed_empirical: empty point list");
    SpectralField out(d, kmax);
    const int n = out.modes_per_axis();
    std::array<std::vector<cplx>, 3> ph;
    for (int a = 0; a < d; ++a) ph[a].resize(static_cast<std::size_t>(n));
    for (const rvec& x : points) {
        for (int a = 0; a < d; ++a) {
            cplx w = std::polar(1.0, -two_pi * x[a]);
            cplx cur = std::polar(1.0, two_pi * x[a] * kmax);
            for (int q = 0; q < n; ++q) {
                ph[a][static_cast<std::size_t>(q)] = cur;
                cur *= w;
            }
        }
        out.for_each_mode([&](std::size_t i, const ivec& k) {
            cplx p = ph[0][static_cast<std::size_t>(k[0] + kmax)];
            for (int a = 1; a < d; ++a) p *= ph[a][static_cast<std::size_t>(k[a] + kmax)];
            out[i] += p;
        });
    }
    double inv = 1.0 / static_cast<double>(points.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
    ivec zero{0, 0, 0};
    out.at(zero) = cplx(1.0, 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// Grid bridge

struct Grid {
    int d = 1;
    std::size_t M = 1;            // points per axis
    std::vector<cplx> values;     // row-major, last axis fastest

    std::size_t total() const { return values.size(); }
};

// Coefficients -> samples on an M^d grid, x_j = j/M. Exact for any
// M >= 2*kmax+1.
inline Grid to_grid(const SpectralField& f, std::size_t M) {
    if (M < static_cast<std::size_t>(f.modes_per_axis()))
        throw shape_error("to_grid: grid too small for requested kmax (need >= 2*kmax+1 points per axis)");
    Grid g;
    g.d = f.dim();
    g.M = M;
    std::size_t total = 1;
    for (int a = 0; a < g.d; ++a) total *= M;
    g.values.assign(total, cplx(0, 0));
    // scatter coefficients into wrapped bins
    f.for_each_mode([&](std::size_t i, const ivec& k) {
        std::size_t idx = 0;
        for (int a = 0; a < g.d; ++a) {
            long q = k[a] % static_cast<long>(M);
            if (q < 0) q += static_cast<long>(M);
            idx = idx * M + static_cast<std::size_t>(q);
        }
        g.values[idx] += f[i];
    });
    fft::transform_nd(g.values, g.d, M, +1);
    return g;
}

// Samples -> coefficients (inverse of to_grid for bandlimited data).
inline SpectralField from_grid(const Grid& g, int kmax) {
    if (g.M < static_cast<std::size_t>(2 * kmax + 1))
        throw shape_error("from_grid: grid too small for requested kmax");
    std::vector<cplx> work = g.values;
    fft::transform_nd(work, g.d, g.M, -1);
    SpectralField out(g.d, kmax);
    double inv = 1.0;
    for (int a = 0; a < g.d; ++a) inv /= static_cast<double>(g.M);
    out.for_each_mode([&](std::size_t i, const ivec& k) {
        std::size_t idx = 0;
        for (int a = 0; a < g.d; ++a) {
            long q = k[a] % static_cast<long>(g.M);
            if (q < 0) q += static_cast<long>(g.M);
            idx = idx * g.M + static_cast<std::size_t>(q);
        }
        out[i] = work[idx] * inv;
    });
    return out;
}

// Padded grid size for alias-free quadratic products (3/2 rule rounded up to
// a power of two so the radix-2 path is always taken).
inline std::size_t padded_grid_size(int kmax) {
    return fft::next_pow2(static_cast<std::size_t>(3 * kmax + 2));
}

// Dealiased pointwise product, result truncated back to the common lattice.
inline SpectralField dealiased_product(const SpectralField& f, const SpectralField& g) {
    f.require_same(g);
    std::size_t M = padded_grid_size(f.kmax());
    Grid a = to_grid(f, M);
    Grid b = to_grid(g, M);
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] *= b.values[i];
    return from_grid(a, f.kmax());
}

// Quadrature of (grid function) against bandlimited density mu on the same
// grid: (1/M^d) sum_j h(x_j) mu(x_j).
inline double grid_quadrature(const Grid& h, const Grid& mu) {
    if (h.M != mu.M || h.d != mu.d) throw shape_error("grid_quadrature: mismatched grids");
    double acc = 0;
    for (std::size_t i = 0; i < h.values.size(); ++i)
        acc += h.values[i].real() * mu.values[i].real();
    double inv = 1.0;
    for (int a = 0; a < h.d; ++a) inv /= static_cast<double>(h.M);
    return acc * inv;
}

// ---------------------------------------------------------------------------
// Differential multipliers

inline SpectralField derivative(const SpectralField& f, int axis) {
    SpectralField out = f;
    out.for_each_mode([&](std::size_t i, const ivec& k) {
        out[i] = f[i] * cplx(0, two_pi * k[axis]);
    });
    return out;
}

inline SpectralField laplacian(const SpectralField& f) {
    SpectralField out = f;
    out.for_each_mode([&](std::size_t i, const ivec& k) {
        out[i] = f[i] * (-two_pi * two_pi * inorm2(k, f.dim()));
    });
    return out;
}

}  // namespace fluctlab
