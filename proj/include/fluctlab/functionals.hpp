#pragma once

// Cylindrical functionals Phi(f) = g(<f,phi_1>_{H^s}, ..., <f,phi_m>_{H^s})
// on H^{-lambda-2}, their gradients and Hessians, and the generator
// evaluations on the SPDE and particle sides used as cross-checks.
//
// The gradient is Sum_i d_i g . phi_i (Riesz-identified), the Hessian acts
// as h -> Sum_ij d_i d_j g <phi_j, h>_{H^s} phi_i. The "hat" version of a
// field reweights coefficients with <k>^{2s}, turning H^{-lambda-2} inner
// products into dual pairings; its grid values are what the particle-side
// generator evaluates at particle positions.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "kernels.hpp"
#include "meanfield.hpp"
#include "particles.hpp"
#include "spde.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct OuterMap {
    enum class Kind { Linear, Quadratic, TanhProduct, GaussBump };
    Kind kind = Kind::Linear;
    int m = 1;
    std::vector<double> a;       // linear coefficients / tanh scales / quadratic linear part
    std::vector<double> offset;  // tanh offsets / bump center
    std::vector<double> Q;       // quadratic form, row-major m*m, symmetric
    double cutoff = 4.0;         // gaussian cutoff width of the quadratic preset
    double amp = 1.0;
    double width = 1.0;  // bump width

    static OuterMap linear(std::vector<double> coef) {
        OuterMap g;
        g.kind = Kind::Linear;
        g.m = static_cast<int>(coef.size());
        g.a = std::move(coef);
        return g;
    }
    static OuterMap quadratic(std::vector<double> q, std::vector<double> lin, double cutoff) {
        OuterMap g;
        g.kind = Kind::Quadratic;
        g.m = static_cast<int>(lin.size());
        if (q.size() != lin.size() * lin.size()) throw domain_error("quadratic: Q must be m*m");
        g.Q = std::move(q);
        g.a = std::move(lin);
        g.cutoff = cutoff;
        return g;
    }
    static OuterMap tanh_product(std::vector<double> scales, std::vector<double> offsets,
                                 double amp = 1.0) {
        OuterMap g;
        g.kind = Kind::TanhProduct;
        g.m = static_cast<int>(scales.size());
        g.a = std::move(scales);
        g.offset = std::move(offsets);
        if (g.offset.empty()) g.offset.assign(static_cast<std::size_t>(g.m), 0.0);
        g.amp = amp;
        return g;
    }
    static OuterMap gauss_bump(std::vector<double> center, double width, double amp = 1.0) {
        OuterMap g;
        g.kind = Kind::GaussBump;
        g.m = static_cast<int>(center.size());
        g.offset = std::move(center);
        g.width = width;
        g.amp = amp;
        return g;
    }

    double value(const std::vector<double>& z) const {
        switch (kind) {
            case Kind::Linear: {
                double s = 0;
                for (int i = 0; i < m; ++i) s += a[i] * z[i];
                return s;
            }
            case Kind::Quadratic: {
                double q = 0;
                for (int i = 0; i < m; ++i) {
                    q += a[i] * z[i];
                    for (int j = 0; j < m; ++j) q += 0.5 * Q[i * m + j] * z[i] * z[j];
                }
                return q * envelope(z);
            }
            case Kind::TanhProduct: {
                double p = amp;
                for (int i = 0; i < m; ++i) p *= std::tanh(a[i] * z[i] + offset[i]);
                return p;
            }
            case Kind::GaussBump:
                return amp * std::exp(-0.5 * dist2(z) / (width * width));
        }
        return 0;
    }

    std::vector<double> grad(const std::vector<double>& z) const {
        std::vector<double> g(static_cast<std::size_t>(m), 0.0);
        switch (kind) {
            case Kind::Linear:
                for (int i = 0; i < m; ++i) g[i] = a[i];
                break;
            case Kind::Quadratic: {
                double env = envelope(z);
                double q = 0;
                std::vector<double> dq(static_cast<std::size_t>(m), 0.0);
                for (int i = 0; i < m; ++i) {
                    q += a[i] * z[i];
                    dq[i] = a[i];
                    for (int j = 0; j < m; ++j) {
                        q += 0.5 * Q[i * m + j] * z[i] * z[j];
                        dq[i] += Q[i * m + j] * z[j];
                    }
                }
                for (int i = 0; i < m; ++i)
                    g[i] = dq[i] * env + q * env * (-z[i] / (cutoff * cutoff));
                break;
            }
            case Kind::TanhProduct:
                for (int i = 0; i < m; ++i) {
                    double p = amp;
                    for (int l = 0; l < m; ++l) {
                        double u = a[l] * z[l] + offset[l];
                        p *= (l == i) ? a[l] / std::pow(std::cosh(u), 2) : std::tanh(u);
                    }
                    g[i] = p;
                }
                break;
            case Kind::GaussBump: {
                double v = value(z);
                for (int i = 0; i < m; ++i) g[i] = -v * (z[i] - offset[i]) / (width * width);
                break;
            }
        }
        return g;
    }

    std::vector<double> hess(const std::vector<double>& z) const {
        std::vector<double> h(static_cast<std::size_t>(m * m), 0.0);
        switch (kind) {
            case Kind::Linear:
                break;
            case Kind::Quadratic: {
                double env = envelope(z);
                double w2 = cutoff * cutoff;
                double q = 0;
                std::vector<double> dq(static_cast<std::size_t>(m), 0.0);
                for (int i = 0; i < m; ++i) {
                    q += a[i] * z[i];
                    dq[i] = a[i];
                    for (int j = 0; j < m; ++j) {
                        q += 0.5 * Q[i * m + j] * z[i] * z[j];
                        dq[i] += Q[i * m + j] * z[j];
                    }
                }
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j)
                        h[i * m + j] = env * (Q[i * m + j] - dq[i] * z[j] / w2 - dq[j] * z[i] / w2 +
                                              q * (z[i] * z[j] / (w2 * w2) -
                                                   (i == j ? 1.0 / w2 : 0.0)));
                break;
            }
            case Kind::TanhProduct:
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < m; ++j) {
                        double p = amp;
                        for (int l = 0; l < m; ++l) {
                            double u = a[l] * z[l] + offset[l];
                            double th = std::tanh(u), sech2 = 1.0 / std::pow(std::cosh(u), 2);
                            if (l == i && l == j)
                                p *= -2.0 * a[l] * a[l] * th * sech2;
                            else if (l == i || l == j)
                                p *= a[l] * sech2;
                            else
                                p *= th;
                        }
                        h[i * m + j] = p;
                    }
                }
                break;
            case Kind::GaussBump: {
                double v = value(z);
                double w2 = width * width;
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j)
                        h[i * m + j] = v * ((z[i] - offset[i]) * (z[j] - offset[j]) / (w2 * w2) -
                                            (i == j ? 1.0 / w2 : 0.0));
                break;
            }
        }
        return h;
    }

    // bounded-with-bounded-derivatives sanity probe on a coarse grid
    bool bounded_probe(double range = 50.0) const {
        std::vector<double> z(static_cast<std::size_t>(m), 0.0);
        for (int trial = 0; trial < 64; ++trial) {
            for (int i = 0; i < m; ++i)
                z[i] = range * std::sin(1.7 * trial + 2.3 * i) * std::cos(0.9 * trial * (i + 1));
            double v = value(z);
            if (!std::isfinite(v)) return false;
            for (double gi : grad(z))
                if (!std::isfinite(gi)) return false;
            for (double hij : hess(z))
                if (!std::isfinite(hij)) return false;
        }
        return true;
    }

  private:
    double envelope(const std::vector<double>& z) const {
        double s = 0;
        for (int i = 0; i < m; ++i) s += z[i] * z[i];
        return std::exp(-0.5 * s / (cutoff * cutoff));
    }
    double dist2(const std::vector<double>& z) const {
        double s = 0;
        for (int i = 0; i < m; ++i) s += (z[i] - offset[i]) * (z[i] - offset[i]);
        return s;
    }
};

class CylindricalFunctional {
  public:
    CylindricalFunctional(OuterMap outer, std::vector<SpectralField> phis, SobolevIndices idx)
        : outer_(std::move(outer)), phis_(std::move(phis)), idx_(idx) {
        if (phis_.empty() || static_cast<int>(phis_.size()) != outer_.m)
            throw domain_error("CylindricalFunctional: outer arity must match the test functions");
        for (std::size_t i = 1; i < phis_.size(); ++i) phis_[0].require_same(phis_[i]);
        for (const auto& p : phis_)
            if (p.hermitian_defect() > 1e-10)
                throw domain_error("CylindricalFunctional: test functions must be real-valued");
        if (!outer_.bounded_probe())
            throw domain_error("CylindricalFunctional: outer map unbounded on the probe grid");
        s_ = idx_.s_fluct();
        // hat fields: coefficients reweighted with <k>^{2s}
        for (const auto& p : phis_) {
            SpectralField hat = p;
            hat.for_each_mode([&](std::size_t i, const ivec& k) {
                hat[i] = p[i] * std::pow(bracket2(k, p.dim()), s_);
            });
            phi_hats_.push_back(hat);
        }
    }

    int arity() const { return outer_.m; }
    double sobolev_index() const { return s_; }
    const SobolevIndices& indices() const { return idx_; }
    const std::vector<SpectralField>& phis() const { return phis_; }
    const std::vector<SpectralField>& phi_hats() const { return phi_hats_; }
    const OuterMap& outer() const { return outer_; }

    std::vector<double> inner_products(const SpectralField& f) const {
        std::vector<double> z(phis_.size());
        for (std::size_t i = 0; i < phis_.size(); ++i)
            z[i] = sobolev_inner(f, phis_[i], s_).real();
        return z;
    }

    double eval(const SpectralField& f) const { return outer_.value(inner_products(f)); }

    SpectralField gradient(const SpectralField& f) const {
        auto dg = outer_.grad(inner_products(f));
        SpectralField out(phis_[0].dim(), phis_[0].kmax());
        for (std::size_t i = 0; i < phis_.size(); ++i) {
            SpectralField t = phis_[i];
            t *= cplx(dg[i], 0);
            out += t;
        }
        return out;
    }

    SpectralField hessian_apply(const SpectralField& f, const SpectralField& h) const {
        auto d2 = outer_.hess(inner_products(f));
        int m = outer_.m;
        SpectralField out(phis_[0].dim(), phis_[0].kmax());
        for (int i = 0; i < m; ++i) {
            double w = 0;
            for (int j = 0; j < m; ++j)
                w += d2[i * m + j] * sobolev_inner(phis_[static_cast<std::size_t>(j)], h, s_).real();
            SpectralField t = phis_[static_cast<std::size_t>(i)];
            t *= cplx(w, 0);
            out += t;
        }
        return out;
    }

    // grad Phi-hat as a function of x: Sum_i d_i g . phi_hat_i.
    SpectralField gradient_hat(const SpectralField& f) const {
        auto dg = outer_.grad(inner_products(f));
        SpectralField out(phis_[0].dim(), phis_[0].kmax());
        for (std::size_t i = 0; i < phis_.size(); ++i) {
            SpectralField t = phi_hats_[i];
            t *= cplx(dg[i], 0);
            out += t;
        }
        return out;
    }

    // probe-grid estimates of [Phi]_{C^1}, [Phi]_{C^2} (suprema over sampled
    // f, not certified bounds)
    std::array<double, 2> seminorm_probe(uint64_t seed, int samples = 64) const {
        double c1 = 0, c2 = 0;
        rng::Stream rs(seed, {rng::tag_test, 9001});
        int m = outer_.m;
        // Gram matrix of the phi_i in H^s
        std::vector<double> gram(static_cast<std::size_t>(m * m));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                gram[i * m + j] = sobolev_inner(phis_[static_cast<std::size_t>(i)],
                                                phis_[static_cast<std::size_t>(j)], s_)
                                      .real();
        for (int trial = 0; trial < samples; ++trial) {
            rng::Sequence seq(rs, static_cast<uint64_t>(trial));
            std::vector<double> z(static_cast<std::size_t>(m));
            for (auto& v : z) v = 3.0 * seq.gaussian();
            auto dg = outer_.grad(z);
            auto d2 = outer_.hess(z);
            double g2 = 0;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) g2 += dg[i] * gram[i * m + j] * dg[j];
            c1 = std::max(c1, std::sqrt(std::max(0.0, g2)));
            // operator norm of Hess through a few power iterations of (G H) on
            // coordinates
            std::vector<double> v(static_cast<std::size_t>(m), 1.0), w(static_cast<std::size_t>(m));
            double lam = 0;
            for (int it = 0; it < 24; ++it) {
                for (int i = 0; i < m; ++i) {
                    w[i] = 0;
                    for (int j = 0; j < m; ++j)
                        for (int l = 0; l < m; ++l)
                            w[i] += gram[i * m + j] * d2[j * m + l] * v[l];
                }
                double n = 0;
                for (int i = 0; i < m; ++i) n += w[i] * w[i];
                n = std::sqrt(n);
                if (n < 1e-300) break;
                lam = n;
                for (int i = 0; i < m; ++i) v[i] = w[i] / n;
            }
            c2 = std::max(c2, lam);
        }
        return {c1, c2};
    }

  private:
    OuterMap outer_;
    std::vector<SpectralField> phis_;
    std::vector<SpectralField> phi_hats_;
    SobolevIndices idx_;
    double s_ = -4.0;
};

// ---------------------------------------------------------------------------
// Generators

struct SpdeGeneratorResult {
    double drift_term = 0;
    double trace_modes = 0;     // trace over the truncated noise basis
    double trace_diagonal = 0;  // diagonal-derivative representation
    double value = 0;           // drift + trace/2 (mode path)
};

// Generator of the approximating SPDE evaluated on Phi at state f:
//   <A_n(t,f), grad Phi(f)>_{H^s} + 1/2 sum_j Tr(Hess . B_j B_j^*).
// The trace is computed two ways: over the real L^2 basis truncated at
// |l|_inf <= L_trace, and through the diagonal second-derivative formula.
// With L_trace >= 2 kmax both are exact and must agree.
inline SpdeGeneratorResult generator_spde(const CylindricalFunctional& Phi, const SpectralField& f,
                                          double t, int n, const SpdeEngine& engine,
                                          const MuCurve& curve, int L_trace,
                                          double consistency_tol = 1e-8) {
    SpdeGeneratorResult res;
    const double s = Phi.sobolev_index();
    res.drift_term = sobolev_inner(engine.apply_A_n(t, f, n, curve), Phi.gradient(f), s).real();

    const auto z = Phi.inner_products(f);
    const auto d2 = Phi.outer().hess(z);
    const int m = Phi.arity();
    const int d = engine.dim();
    const int kmax = engine.kmax();
    const double sigma = engine.sigma();
    const SpectralField& shat = curve.sqrt_at(t);

    // path 1: real orthonormal basis {1, sqrt2 cos_l, sqrt2 sin_l}
    SpectralField lbox(d, L_trace);
    auto add_basis = [&](const SpectralField& bju) {
        std::vector<double> ti(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            ti[static_cast<std::size_t>(i)] =
                sobolev_inner(Phi.phis()[static_cast<std::size_t>(i)], bju, s).real();
        double acc = 0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                acc += d2[static_cast<std::size_t>(i * m + j)] * ti[static_cast<std::size_t>(i)] *
                       ti[static_cast<std::size_t>(j)];
        res.trace_modes += acc;
    };
    for (int j = 0; j < d; ++j) {
        lbox.for_each_mode([&](std::size_t, const ivec& l) {
            int lead = 0;
            for (int a = 0; a < d; ++a) {
                if (l[a] != 0) {
                    lead = l[a];
                    break;
                }
            }
            if (lead < 0) return;  // half lattice plus l = 0
            // B_j u for u = 1 (l=0), sqrt2 cos_l, sqrt2 sin_l
            SpectralField bc(d, kmax), bs(d, kmax);
            bool have_sin = lead > 0;
            bc.for_each_mode([&](std::size_t i, const ivec& k) {
                if (k[j] == 0) return;
                ivec km{k[0] - l[0], k[1] - l[1], k[2] - l[2]};
                ivec kp{k[0] + l[0], k[1] + l[1], k[2] + l[2]};
                cplx sm = shat.in_lattice(km) ? shat.at(km) : cplx(0, 0);
                cplx sp = shat.in_lattice(kp) ? shat.at(kp) : cplx(0, 0);
                cplx dfac(0, two_pi * k[j]);
                if (lead == 0) {
                    bc[i] = sigma * dfac * sm;
                } else {
                    bc[i] = sigma * dfac * (sm + sp) / std::sqrt(2.0);
                    bs[i] = sigma * dfac * (sm - sp) * cplx(0, -1.0 / std::sqrt(2.0));
                }
            });
            add_basis(bc);
            if (have_sin) add_basis(bs);
        });
    }

    // path 2: (sigma^2/2) sum_j int d_j phihat_i d_j phihat_l dmu. The
    // effective density is the square of the truncated sqrt(mu) the noise
    // operators act with, which keeps the identity exact at the discrete
    // level.
    std::size_t pad = padded_grid_size(kmax);
    Grid mu_grid = to_grid(shat, pad);
    for (auto& v : mu_grid.values) v *= v;
    for (int j = 0; j < d; ++j) {
        std::vector<Grid> dg;
        for (int i = 0; i < m; ++i)
            dg.push_back(to_grid(derivative(Phi.phi_hats()[static_cast<std::size_t>(i)], j), pad));
        for (int i = 0; i < m; ++i) {
            for (int l = 0; l < m; ++l) {
                Grid prod = dg[static_cast<std::size_t>(i)];
                for (std::size_t q = 0; q < prod.values.size(); ++q)
                    prod.values[q] *= dg[static_cast<std::size_t>(l)].values[q];
                res.trace_diagonal +=
                    sigma * sigma * d2[static_cast<std::size_t>(i * m + l)] * grid_quadrature(prod, mu_grid);
            }
        }
    }

    if (L_trace >= 2 * kmax) {
        double scale = std::abs(res.trace_modes) + std::abs(res.trace_diagonal) + 1.0;
        if (std::abs(res.trace_modes - res.trace_diagonal) > consistency_tol * scale)
            throw internal_consistency_error(
                "generator_spde: trace representations disagree: " +
                std::to_string(res.trace_modes) + " vs " + std::to_string(res.trace_diagonal));
    }
    res.value = res.drift_term + 0.5 * res.trace_modes;
    return res;
}

// Shared-phase evaluator of several coefficient fields at one point.
class PointEvaluator {
  public:
    PointEvaluator(int d, int kmax, const rvec& x) : d_(d), kmax_(kmax) {
        int n = 2 * kmax + 1;
        for (int a = 0; a < d_; ++a) {
            ph_[a].resize(static_cast<std::size_t>(n));
            cplx w = std::polar(1.0, two_pi * x[a]);
            cplx cur = std::polar(1.0, -two_pi * x[a] * kmax);
            for (int q = 0; q < n; ++q) {
                ph_[a][static_cast<std::size_t>(q)] = cur;
                cur *= w;
            }
        }
    }

    double eval_real(const SpectralField& f) const {
        cplx s(0, 0);
        f.for_each_mode([&](std::size_t i, const ivec& k) {
            cplx p = ph_[0][static_cast<std::size_t>(k[0] + kmax_)];
            for (int a = 1; a < d_; ++a) p *= ph_[a][static_cast<std::size_t>(k[a] + kmax_)];
            s += f[i] * p;
        });
        return s.real();
    }

  private:
    int d_, kmax_;
    std::array<std::vector<cplx>, 3> ph_;
};

// Generator of the fluctuation process evaluated on Phi at the current
// ensemble (convolution drift; the second-flat-derivative term vanishes):
//   (i)   int (K*rho^N).D(grad Phi-hat) dmu
//   (ii)  < (K*mu^N).D(grad Phi-hat) + (sigma^2/2) Lap grad Phi-hat , rho^N >
//   (iii) (sigma^2/2) sum_j int d_xj d_yj Hess-hat |_{x=y} dmu^N
// Integrals against mu use grid quadrature, integrals against mu^N exact
// particle sums.
inline double generator_particle(const CylindricalFunctional& Phi, const ParticleEnsemble& ens,
                                 const SpectralField& mu, double /*t*/, const DriftModel& model,
                                 double sigma) {
    const int d = mu.dim();
    const int kmax = mu.kmax();
    const double rootN = std::sqrt(static_cast<double>(ens.count()));
    SpectralField emp = embed_empirical(ens.positions, d, kmax);
    SpectralField rho = emp - mu;
    rho *= rootN;
    ivec zero{0, 0, 0};
    rho.at(zero) = cplx(0, 0);

    SpectralField grad_hat = Phi.gradient_hat(rho);
    const auto d2 = Phi.outer().hess(Phi.inner_products(rho));
    const int m = Phi.arity();

    std::vector<SpectralField> dgrad;  // D(grad Phi-hat)
    for (int a = 0; a < d; ++a) dgrad.push_back(derivative(grad_hat, a));
    SpectralField lap_grad = laplacian(grad_hat);

    // convolution fields
    std::vector<SpectralField> k_rho(static_cast<std::size_t>(d), SpectralField(d, kmax));
    std::vector<SpectralField> k_emp(static_cast<std::size_t>(d), SpectralField(d, kmax));
    rho.for_each_mode([&](std::size_t i, const ivec& k) {
        cvec kh = model.multiplier(k);
        for (int a = 0; a < d; ++a) {
            k_rho[static_cast<std::size_t>(a)][i] = kh[a] * rho[i];
            k_emp[static_cast<std::size_t>(a)][i] = kh[a] * emp[i];
        }
    });

    std::vector<SpectralField> dphi_hats;  // d_j phi_hat_i, laid out i*d + j
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j)
            dphi_hats.push_back(derivative(Phi.phi_hats()[static_cast<std::size_t>(i)], j));

    std::size_t pad = padded_grid_size(kmax);
    Grid mu_grid = to_grid(mu, pad);

    // (i): quadrature of (K*rho).D grad-hat against mu
    double term1 = 0;
    for (int a = 0; a < d; ++a) {
        Grid ga = to_grid(k_rho[static_cast<std::size_t>(a)], pad);
        Grid da = to_grid(dgrad[static_cast<std::size_t>(a)], pad);
        for (std::size_t q = 0; q < ga.values.size(); ++q) ga.values[q] *= da.values[q];
        term1 += grid_quadrature(ga, mu_grid);
    }

    // (ii): G = (K*mu^N).D grad-hat + (sigma^2/2) Lap grad-hat against rho^N
    double part_sum = 0;
    for (const rvec& x : ens.positions) {
        PointEvaluator pe(d, kmax, x);
        double gx = 0.5 * sigma * sigma * pe.eval_real(lap_grad);
        for (int a = 0; a < d; ++a)
            gx += pe.eval_real(k_emp[static_cast<std::size_t>(a)]) *
                  pe.eval_real(dgrad[static_cast<std::size_t>(a)]);
        part_sum += gx;
    }
    part_sum /= static_cast<double>(ens.count());
    double quad_sum = 0;
    {
        Grid acc(mu_grid);
        for (auto& v : acc.values) v = cplx(0, 0);
        Grid lg = to_grid(lap_grad, pad);
        for (std::size_t q = 0; q < acc.values.size(); ++q)
            acc.values[q] += 0.5 * sigma * sigma * lg.values[q];
        for (int a = 0; a < d; ++a) {
            Grid ka = to_grid(k_emp[static_cast<std::size_t>(a)], pad);
            Grid da = to_grid(dgrad[static_cast<std::size_t>(a)], pad);
            for (std::size_t q = 0; q < acc.values.size(); ++q)
                acc.values[q] += ka.values[q] * da.values[q];
        }
        quad_sum = grid_quadrature(acc, mu_grid);
    }
    double term2 = rootN * (part_sum - quad_sum);

    // (iii): diagonal Hessian derivative against mu^N, exact particle sums
    double term3 = 0;
    for (const rvec& x : ens.positions) {
        PointEvaluator pe(d, kmax, x);
        std::vector<double> vals(dphi_hats.size());
        for (std::size_t q = 0; q < dphi_hats.size(); ++q) vals[q] = pe.eval_real(dphi_hats[q]);
        for (int i = 0; i < m; ++i)
            for (int l = 0; l < m; ++l)
                for (int j = 0; j < d; ++j)
                    term3 += d2[static_cast<std::size_t>(i * m + l)] *
                             vals[static_cast<std::size_t>(i * d + j)] *
                             vals[static_cast<std::size_t>(l * d + j)];
    }
    term3 *= 0.5 * sigma * sigma / static_cast<double>(ens.count());

    return term1 + term2 + term3;
}

}  // namespace fluctlab
