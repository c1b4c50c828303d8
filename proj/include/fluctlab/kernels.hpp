#pragma once

// Drift models b(t,x,m) = (K*m)(x) for the three kernel families:
//   - SmoothConvolution: bandlimited kernel given by a sparse multiplier table
//   - BiotSavart2D:      K(x) = (1/2pi) (-x2,x1)/|x|^2, periodized
//   - CoulombGradient:   repulsive gradient kernel, short range x/|x|^d
//
// The Fourier multiplier is the ground truth for periodization. The
// real-space K_per is a truncated lattice-image sum over the symmetric box
// |m|_inf <= image_radius around the minimal-image displacement; with that
// construction the cell average of the truncated sum vanishes exactly for
// odd kernels, so the mean-removal constant is zero.

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct DriftModel {
    enum class Variant { SmoothConvolution, BiotSavart2D, CoulombGradient };
    enum class Normalization { MeanField, Unscaled };

    Variant variant = Variant::SmoothConvolution;
    int d = 1;
    std::vector<std::pair<ivec, cvec>> table;  // smooth variant only
    double sigma_conv = 0.0;                   // smoothing width of gauss_reg preset
    int image_radius = 30;
    Normalization normalization = Normalization::MeanField;
    bool capped = false;
    double eps_cap = 1e-3;

    bool singular() const { return variant != Variant::SmoothConvolution; }

    // ---- constructors ----

    static DriftModel smooth(int d, std::vector<std::pair<ivec, cvec>> tab) {
        DriftModel m;
        m.variant = Variant::SmoothConvolution;
        m.d = d;
        m.table = std::move(tab);
        m.validate_table();
        return m;
    }

    // K(x) = -alpha * sin(2 pi x) in d=1
    static DriftModel sine1d(double alpha) {
        cplx half_i(0, 0.5);
        return smooth(1, {{ivec{1, 0, 0}, cvec{alpha * half_i, 0, 0}},
                          {ivec{-1, 0, 0}, cvec{-alpha * half_i, 0, 0}}});
    }

    // Gaussian-regularized gradient kernel: Khat(k) = -i k/|k|^2 exp(-2 pi^2 w^2 |k|^2)
    static DriftModel gauss_reg(int d, int kmax, double width) {
        std::vector<std::pair<ivec, cvec>> tab;
        SpectralField probe(d, kmax);
        probe.for_each_mode([&](std::size_t, const ivec& k) {
            int k2 = inorm2(k, d);
            if (k2 == 0) return;
            double damp = std::exp(-2.0 * two_pi * two_pi / 4.0 * width * width * k2);
            cvec v{};
            for (int a = 0; a < d; ++a) v[a] = cplx(0, -k[a] / static_cast<double>(k2)) * damp;
            tab.push_back({k, v});
        });
        DriftModel m = smooth(d, std::move(tab));
        m.sigma_conv = width;
        return m;
    }

    static DriftModel biot_savart() {
        DriftModel m;
        m.variant = Variant::BiotSavart2D;
        m.d = 2;
        m.image_radius = 30;
        return m;
    }

    static DriftModel coulomb(int d) {
        if (d != 2 && d != 3) throw domain_error("coulomb: d must be 2 or 3");
        DriftModel m;
        m.variant = Variant::CoulombGradient;
        m.d = d;
        m.image_radius = (d == 2) ? 30 : 8;
        return m;
    }

    void validate_table() const {
        for (const auto& [k, v] : table) {
            if (inorm2(k, d) == 0) {
                for (int a = 0; a < d; ++a)
                    if (std::abs(v[a]) != 0.0)
                        throw domain_error("drift multiplier at k=0 must vanish (mean-zero kernel)");
            }
            // Hermitian partner must be present and conjugate
            bool found = false;
            for (const auto& [k2, v2] : table) {
                bool neg = true;
                for (int a = 0; a < d; ++a) neg = neg && (k2[a] == -k[a]);
                if (neg) {
                    found = true;
                    for (int a = 0; a < d; ++a)
                        if (std::abs(v2[a] - std::conj(v[a])) > 1e-14)
                            throw domain_error("drift multiplier table is not Hermitian at k=" + ivec_str(k, d));
                }
            }
            if (!found) throw domain_error("drift multiplier table misses -k partner of " + ivec_str(k, d));
        }
    }

    // ---- Fourier side ----

    cvec multiplier(const ivec& k) const {
        cvec out{};
        int k2 = inorm2(k, d);
        if (k2 == 0) return out;  // periodization removes the mean
        switch (variant) {
            case Variant::SmoothConvolution:
                for (const auto& [ki, v] : table) {
                    bool eq = true;
                    for (int a = 0; a < d; ++a) eq = eq && (ki[a] == k[a]);
                    if (eq) return v;
                }
                return out;
            case Variant::BiotSavart2D:
                // K = grad^perp of the log potential; pinned by the image-sum oracle
                out[0] = cplx(0, k[1] / (two_pi * k2));
                out[1] = cplx(0, -k[0] / (two_pi * k2));
                return out;
            case Variant::CoulombGradient: {
                double c = (d == 2) ? 1.0 : 2.0;
                for (int a = 0; a < d; ++a) out[a] = cplx(0, -c * k[a] / static_cast<double>(k2));
                return out;
            }
        }
        return out;
    }

    cvec multiplier_checked(const ivec& k, int kmax) const {
        for (int a = 0; a < d; ++a)
            if (k[a] < -kmax || k[a] > kmax)
                throw index_error("spectral_multiplier: k=" + ivec_str(k, d) + " outside lattice");
        return multiplier(k);
    }

    // Potential multiplier Ghat(k) with K = -grad G, i.e. Khat = -2 pi i k Ghat.
    // CoulombGradient only; positive type, mean zero.
    double potential_multiplier(const ivec& k) const {
        if (variant != Variant::CoulombGradient)
            throw domain_error("potential_multiplier: Coulomb variant only");
        int k2 = inorm2(k, d);
        if (k2 == 0) return 0.0;
        double c = (d == 2) ? 1.0 : 2.0;
        return c / (two_pi * k2);
    }

    // (K*m) as a vector of spectral fields.
    std::vector<SpectralField> convolve(const SpectralField& m) const {
        std::vector<SpectralField> out(static_cast<std::size_t>(d), SpectralField(m.dim(), m.kmax()));
        m.for_each_mode([&](std::size_t i, const ivec& k) {
            cvec kh = multiplier(k);
            for (int a = 0; a < d; ++a) out[static_cast<std::size_t>(a)][i] = kh[a] * m[i];
        });
        return out;
    }

    // ---- real space ----

    rvec free_kernel(const rvec& x) const {
        double r2 = norm2(x, d);
        rvec out{};
        switch (variant) {
            case Variant::SmoothConvolution: {
                // finite Fourier sum
                cvec acc{};
                for (const auto& [k, v] : table) {
                    double ph = 0;
                    for (int a = 0; a < d; ++a) ph += k[a] * x[a];
                    cplx e = std::polar(1.0, two_pi * ph);
                    for (int a = 0; a < d; ++a) acc[a] += v[a] * e;
                }
                for (int a = 0; a < d; ++a) out[a] = acc[a].real();
                return out;
            }
            case Variant::BiotSavart2D:
                out[0] = -x[1] / (two_pi * r2);
                out[1] = x[0] / (two_pi * r2);
                return out;
            case Variant::CoulombGradient: {
                double rd = (d == 2) ? r2 : r2 * std::sqrt(r2);
                for (int a = 0; a < d; ++a) out[a] = x[a] / rd;
                return out;
            }
        }
        return out;
    }

    static rvec min_image(const rvec& x, int d) {
        rvec y{};
        for (int a = 0; a < d; ++a) y[a] = x[a] - std::round(x[a]);
        return y;
    }

    // The plain square-box image sum carries the full delta-lattice source,
    // while the multiplier kernel is sourced by (delta - 1): the uniform
    // background induces a rigid field that must be removed analytically.
    // For the vortex that is a solid rotation, for the Coulomb gradient a
    // radial inflation; both are odd, so antisymmetry is preserved.
    rvec background_term(const rvec& y) const {
        rvec b{};
        if (variant == Variant::BiotSavart2D) {
            b[0] = -0.5 * y[1];
            b[1] = 0.5 * y[0];
        } else if (variant == Variant::CoulombGradient) {
            // div K_free = c_d * delta with c_2 = 2 pi, c_3 = 4 pi
            double cd = (d == 2) ? two_pi / 2.0 : 2.0 * two_pi / 3.0;
            for (int a = 0; a < d; ++a) b[a] = cd * y[a];
        }
        return b;
    }

    // Periodized kernel via truncated image sum minus the analytic background
    // term, so that it converges to the Fourier multiplier ground truth.
    // K_per(0) := 0 for singular variants; smooth variants return the exact
    // finite Fourier sum.
    rvec kper(const rvec& x) const {
        if (!singular()) return free_kernel(x);
        rvec y = min_image(x, d);
        if (norm2(y, d) < 1e-28)
            throw singularity_error("kper: evaluation at a lattice point of the singular kernel");
        rvec acc = background_term(y);
        for (int a = 0; a < d; ++a) acc[a] = -acc[a];
        ivec m{};
        int R = image_radius;
        auto add = [&](const rvec& z) {
            rvec v = free_kernel(z);
            for (int a = 0; a < d; ++a) acc[a] += v[a];
        };
        if (d == 2) {
            for (m[0] = -R; m[0] <= R; ++m[0])
                for (m[1] = -R; m[1] <= R; ++m[1])
                    add({y[0] + m[0], y[1] + m[1], 0});
        } else {
            for (m[0] = -R; m[0] <= R; ++m[0])
                for (m[1] = -R; m[1] <= R; ++m[1])
                    for (m[2] = -R; m[2] <= R; ++m[2])
                        add({y[0] + m[0], y[1] + m[1], y[2] + m[2]});
        }
        if (capped) {
            double n = std::sqrt(norm2(acc, d));
            double cap = 1.0 / eps_cap;
            if (n > cap)
                for (int a = 0; a < d; ++a) acc[a] *= cap / n;
        }
        return acc;
    }

    // delta b / delta m (t,x,m,v) = K_per(x - v); the second flat derivative
    // vanishes identically for convolution drifts.
    rvec flat_derivative(const rvec& x, const rvec& v) const {
        rvec diff{};
        for (int a = 0; a < d; ++a) diff[a] = x[a] - v[a];
        if (!singular()) return free_kernel(diff);
        rvec y = min_image(diff, d);
        if (norm2(y, d) < 1e-28)
            throw singularity_error("flat_derivative: x = v under a singular kernel");
        return kper(diff);
    }

    // ---- particle drift ----

    // velocity_i = w * sum_{j != i} K_per(X_i - X_j), w = 1/N (MeanField) or 1
    // (Unscaled).
    std::vector<rvec> drift_at_particles(const std::vector<rvec>& pos) const {
        std::size_t N = pos.size();
        std::vector<rvec> vel(N, rvec{});
        if (N == 0) return vel;
        double w = (normalization == Normalization::MeanField) ? 1.0 / static_cast<double>(N) : 1.0;
        if (!singular()) {
            // spectral path through the empirical coefficients of the table
            // modes; Hermitian pairs are folded so each half-lattice entry
            // costs one phase per particle
            rvec self{};  // K_per(0) = sum of table values, real by symmetry
            for (const auto& [k, v] : table)
                for (int a = 0; a < d; ++a) self[a] += v[a].real();
            std::vector<cplx> phase(N);
            for (const auto& [k, v] : table) {
                int lead = 0;
                for (int a = 0; a < d; ++a) {
                    if (k[a] != 0) {
                        lead = k[a];
                        break;
                    }
                }
                if (lead <= 0) continue;  // conjugate partner handles it
                cplx emp(0, 0);
                for (std::size_t i = 0; i < N; ++i) {
                    double ph = 0;
                    for (int a = 0; a < d; ++a) ph += k[a] * pos[i][a];
                    phase[i] = std::polar(1.0, two_pi * ph);
                    emp += std::conj(phase[i]);
                }
                for (std::size_t i = 0; i < N; ++i) {
                    cplx base = emp * phase[i];
                    for (int a = 0; a < d; ++a) vel[i][a] += 2.0 * (v[a] * base).real();
                }
            }
            for (std::size_t i = 0; i < N; ++i)
                for (int a = 0; a < d; ++a) vel[i][a] = w * (vel[i][a] - self[a]);
            return vel;
        }
        // singular variants: direct pair sum, antisymmetry exploited so that
        // momentum cancels exactly
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = i + 1; j < N; ++j) {
                rvec diff{};
                for (int a = 0; a < d; ++a) diff[a] = pos[i][a] - pos[j][a];
                rvec y = min_image(diff, d);
                if (norm2(y, d) < 1e-28)
                    throw singularity_error("drift_at_particles: particles " + std::to_string(i) +
                                            " and " + std::to_string(j) + " coincide");
                rvec kij = kper(diff);
                for (int a = 0; a < d; ++a) {
                    vel[i][a] += w * kij[a];
                    vel[j][a] -= w * kij[a];
                }
            }
        }
        return vel;
    }
};

}  // namespace fluctlab
