#pragma once

// Galerkin integrator for the limiting fluctuation SPDE
//
//     d rho = A_n(t, rho) dt + sum_j B_j(t) dW_j,
//
// with drift operators
//
//     A(t,f)  = -div(f (K*mu_t)) - div(mu_t (K*f)) + (sigma^2/2) Lap f
//     A'(t)p  = (K*mu_t).Dp + [v -> int K(x-v).Dp(x) mu_t(x) dx] + (sigma^2/2) Lap p
//     A_n     = j_n o A o j_n            (n = 0 means the unmollified A)
//
// and noise increments
//
//     c_k(dzeta) = sigma sum_j sum_{|l|<=L} (2 pi i k_j) shat(k-l) dbeta_{l,j},
//
// where shat is the coefficient vector of sqrt(mu_t) and the dbeta are
// complex Gaussians drawn on a half lattice with dbeta_{-l} = conj(dbeta_l),
// E|dbeta_l|^2 = dt. Uniform mu collapses both the operators and the noise
// to per-mode expressions, which the engine exploits.

#include <cmath>
#include <vector>

#include "common.hpp"
#include "kernels.hpp"
#include "meanfield.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct GalerkinState {
    SpectralField rho;
    double t = 0.0;
    int n_mollify = 0;  // 0 = unmollified A
    int L_noise = 0;
    SobolevIndices indices;
    uint64_t step_index = 0;
};

struct NoiseModel {
    double sigma = 1.0;
    int L = 0;
};

inline bool curve_is_uniform(const MuCurve& curve) {
    if (!curve.stationary) return false;
    const SpectralField& mu = curve.mus.front();
    bool uni = true;
    mu.for_each_mode([&](std::size_t i, const ivec& k) {
        if (inorm2(k, mu.dim()) > 0 && std::abs(mu[i]) > 1e-15) uni = false;
    });
    return uni;
}

class SpdeEngine {
  public:
    SpdeEngine(const DriftModel& model, int d, int kmax, double sigma)
        : model_(model), d_(d), kmax_(kmax), sigma_(sigma), pad_(padded_grid_size(kmax)) {
        SpectralField probe(d, kmax);
        mult_.assign(static_cast<std::size_t>(d), SpectralField(d, kmax));
        probe.for_each_mode([&](std::size_t i, const ivec& k) {
            cvec kh = model.multiplier(k);
            for (int a = 0; a < d; ++a) mult_[static_cast<std::size_t>(a)][i] = kh[a];
        });
    }

    int dim() const { return d_; }
    int kmax() const { return kmax_; }
    double sigma() const { return sigma_; }
    const DriftModel& model() const { return model_; }

    // A'(t) phi
    SpectralField apply_Aprime(double t, const SpectralField& phi, const MuCurve& curve) const {
        const SpectralField& mu = curve.mu_at(t);
        SpectralField out = scaled_laplacian(phi);
        if (curve_is_uniform(curve)) {
            // b = 0; the flat-derivative term reduces to v -> int K(x-v).Dp(x) dx
            out.for_each_mode([&](std::size_t i, const ivec& k) {
                ivec mk{-k[0], -k[1], -k[2]};
                for (int a = 0; a < d_; ++a) {
                    cplx kh_neg = mult_[static_cast<std::size_t>(a)].at(mk);
                    out[i] += kh_neg * (cplx(0, two_pi * k[a]) * phi[i]);
                }
            });
            return out;
        }
        Grid mu_grid = to_grid(mu, pad_);
        for (int a = 0; a < d_; ++a) {
            SpectralField dphi = derivative(phi, a);
            // b_a . d_a phi
            SpectralField ba(d_, kmax_);
            for (std::size_t i = 0; i < ba.size(); ++i)
                ba[i] = mult_[static_cast<std::size_t>(a)][i] * mu[i];
            Grid bg = to_grid(ba, pad_);
            Grid dg = to_grid(dphi, pad_);
            for (std::size_t i = 0; i < bg.values.size(); ++i) bg.values[i] *= dg.values[i];
            out += from_grid(bg, kmax_);
            // correlation term: v -> int K(x-v).Dphi(x) mu(x) dx
            for (std::size_t i = 0; i < dg.values.size(); ++i) dg.values[i] *= mu_grid.values[i];
            SpectralField mdp = from_grid(dg, kmax_);
            out.for_each_mode([&](std::size_t i, const ivec& k) {
                ivec mk{-k[0], -k[1], -k[2]};
                out[i] += mult_[static_cast<std::size_t>(a)].at(mk) * mdp[i];
            });
        }
        return out;
    }

    // A(t) f, optionally without the diffusion part.
    SpectralField apply_A(double t, const SpectralField& f, const MuCurve& curve,
                          bool include_diffusion = true) const {
        const SpectralField& mu = curve.mu_at(t);
        SpectralField out(d_, kmax_);
        if (include_diffusion) out = scaled_laplacian(f);
        if (curve_is_uniform(curve)) {
            // -div(K*f): mode-diagonal
            out.for_each_mode([&](std::size_t i, const ivec& k) {
                for (int a = 0; a < d_; ++a)
                    out[i] -= cplx(0, two_pi * k[a]) * mult_[static_cast<std::size_t>(a)][i] * f[i];
            });
            return out;
        }
        Grid mu_grid = to_grid(mu, pad_);
        Grid f_grid = to_grid(f, pad_);
        for (int a = 0; a < d_; ++a) {
            // -d_a ( f b_a ),  b = K*mu
            SpectralField ba(d_, kmax_);
            SpectralField kfa(d_, kmax_);
            for (std::size_t i = 0; i < ba.size(); ++i) {
                ba[i] = mult_[static_cast<std::size_t>(a)][i] * mu[i];
                kfa[i] = mult_[static_cast<std::size_t>(a)][i] * f[i];
            }
            Grid bg = to_grid(ba, pad_);
            for (std::size_t i = 0; i < bg.values.size(); ++i) bg.values[i] *= f_grid.values[i];
            SpectralField flux1 = from_grid(bg, kmax_);
            // -d_a ( mu (K*f)_a )
            Grid kg = to_grid(kfa, pad_);
            for (std::size_t i = 0; i < kg.values.size(); ++i) kg.values[i] *= mu_grid.values[i];
            SpectralField flux2 = from_grid(kg, kmax_);
            out.for_each_mode([&](std::size_t i, const ivec& k) {
                out[i] -= cplx(0, two_pi * k[a]) * (flux1[i] + flux2[i]);
            });
        }
        return out;
    }

    // A_n = j_n o A o j_n; n = 0 falls back to A.
    SpectralField apply_A_n(double t, const SpectralField& f, int n, const MuCurve& curve,
                            bool include_diffusion = true) const {
        if (n == 0) return apply_A(t, f, curve, include_diffusion);
        SpectralField inner = mollify(f, n);
        SpectralField mid = apply_A(t, inner, curve, include_diffusion);
        return mollify(mid, n);
    }

    // One noise increment over [t, t+dt].
    SpectralField noise_increment(double t, double dt, const MuCurve& curve, const NoiseModel& noise,
                                  const rng::Stream& stream, uint64_t page) const {
        SpectralField out(d_, kmax_);
        if (!(dt > 0)) throw domain_error("noise_increment: dt > 0 required");
        const int L = noise.L;
        const double root = std::sqrt(dt);
        // draws on the L-box
        SpectralField beta_box(d_, L);  // reused per component j
        std::vector<std::vector<cplx>> beta(static_cast<std::size_t>(d_));
        for (int j = 0; j < d_; ++j) {
            auto& bj = beta[static_cast<std::size_t>(j)];
            bj.assign(beta_box.size(), cplx(0, 0));
            beta_box.for_each_mode([&](std::size_t idx, const ivec& l) {
                int lead = 0;
                for (int a = 0; a < d_; ++a) {
                    if (l[a] != 0) {
                        lead = l[a];
                        break;
                    }
                }
                if (lead < 0) return;  // filled by mirroring
                uint64_t base = (static_cast<uint64_t>(idx) * static_cast<uint64_t>(d_) +
                                 static_cast<uint64_t>(j)) * 2;
                if (lead == 0) {
                    bj[idx] = cplx(root * stream.gaussian_at(page, base), 0.0);
                } else {
                    double g0 = stream.gaussian_at(page, base);
                    double g1 = stream.gaussian_at(page, base + 1);
                    bj[idx] = root * cplx(g0, g1) / std::sqrt(2.0);
                }
            });
            // mirror: dbeta_{-l} = conj(dbeta_l)
            beta_box.for_each_mode([&](std::size_t idx, const ivec& l) {
                int lead = 0;
                for (int a = 0; a < d_; ++a) {
                    if (l[a] != 0) {
                        lead = l[a];
                        break;
                    }
                }
                if (lead >= 0) return;
                ivec ml{-l[0], -l[1], -l[2]};
                bj[idx] = std::conj(bj[beta_box.flat(ml)]);
            });
        }
        const SpectralField& shat = curve.sqrt_at(t);
        bool uniform = curve_is_uniform(curve);
        out.for_each_mode([&](std::size_t i, const ivec& k) {
            if (inorm2(k, d_) == 0) return;
            for (int j = 0; j < d_; ++j) {
                if (k[j] == 0) continue;
                cplx conv(0, 0);
                if (uniform) {
                    if (beta_box.in_lattice(k)) conv = beta[static_cast<std::size_t>(j)][beta_box.flat(k)];
                } else {
                    beta_box.for_each_mode([&](std::size_t bidx, const ivec& l) {
                        ivec diff{k[0] - l[0], k[1] - l[1], k[2] - l[2]};
                        if (shat.in_lattice(diff))
                            conv += shat.at(diff) * beta[static_cast<std::size_t>(j)][bidx];
                    });
                }
                out[i] += noise.sigma * cplx(0, two_pi * k[j]) * conv;
            }
        });
        return out;
    }

    // Integrating-factor step of the approximating SPDE: the diffusion part
    // of A_n acts exactly per mode, the first-order part explicitly with the
    // phi1 weight, and the noise increment enters through the exact
    // stochastic-convolution filter sqrt((1-e^{-2z})/(2z)) so that per-mode
    // stationary covariances are reproduced without time-step bias.
    void step(GalerkinState& st, double dt, const MuCurve& curve, const NoiseModel& noise,
              const rng::Stream& stream) const {
        SpectralField transport = apply_A_n(st.t, st.rho, st.n_mollify, curve, false);
        SpectralField dz = noise_increment(st.t, dt, curve, noise, stream, st.step_index);
        double nu = 0.5 * sigma_ * sigma_ * two_pi * two_pi;
        st.rho.for_each_mode([&](std::size_t i, const ivec& k) {
            double moll = st.n_mollify > 0
                              ? bump_profile(std::sqrt(static_cast<double>(inorm2(k, d_))) / st.n_mollify)
                              : 1.0;
            double z = nu * inorm2(k, d_) * moll * moll * dt;
            double decay = std::exp(-z);
            double phi1 = z > 1e-12 ? (1.0 - decay) / z : 1.0 - 0.5 * z;
            double conv = z > 1e-12 ? std::sqrt((1.0 - decay * decay) / (2.0 * z)) : 1.0 - 0.5 * z;
            cplx next = st.rho[i] * decay + dt * phi1 * transport[i] + conv * dz[i];
            if (!std::isfinite(next.real()) || !std::isfinite(next.imag()))
                throw instability_error("step_spde: non-finite coefficient at mode " + ivec_str(k, d_));
            st.rho[i] = next;
        });
        ivec zero{0, 0, 0};
        st.rho.at(zero) = cplx(0, 0);
        st.t += dt;
        st.step_index += 1;
    }

    // Deterministic derivative flow Y_{s,t}: integrate dy = A_n(r,y) dr.
    SpectralField linear_flow(const SpectralField& h, double s, double t, int n,
                              const MuCurve& curve, double dt) const {
        if (t < s) throw domain_error("linear_flow: s <= t required");
        SpectralField y = h;
        double r = s;
        double nu = 0.5 * sigma_ * sigma_ * two_pi * two_pi;
        while (r < t - 1e-12) {
            double step_dt = std::min(dt, t - r);
            SpectralField transport = apply_A_n(r, y, n, curve, false);
            y.for_each_mode([&](std::size_t i, const ivec& k) {
                double moll = n > 0 ? bump_profile(std::sqrt(static_cast<double>(inorm2(k, d_))) / n) : 1.0;
                double z = nu * inorm2(k, d_) * moll * moll * step_dt;
                double decay = std::exp(-z);
                double phi1 = z > 1e-12 ? (1.0 - decay) / z : 1.0 - 0.5 * z;
                y[i] = y[i] * decay + step_dt * phi1 * transport[i];
            });
            r += step_dt;
        }
        return y;
    }

    // Initial fluctuation field: either the zero field or the i.i.d.-CLT
    // Gaussian with E|c_k|^2 = 1 - |c_k(mu0)|^2 per half-lattice mode.
    SpectralField sample_rho0(const SpectralField& mu0, const rng::Stream& stream,
                              uint64_t page = 0) const {
        SpectralField rho(d_, kmax_);
        rho.for_each_mode([&](std::size_t i, const ivec& k) {
            int lead = 0;
            for (int a = 0; a < d_; ++a) {
                if (k[a] != 0) {
                    lead = k[a];
                    break;
                }
            }
            if (lead <= 0) return;
            double var = std::max(0.0, 1.0 - std::norm(mu0.at(k)));
            uint64_t base = static_cast<uint64_t>(i) * 2;
            cplx g(stream.gaussian_at(page, base), stream.gaussian_at(page, base + 1));
            rho[i] = std::sqrt(var / 2.0) * g;
        });
        SpectralField out = rho;
        out.for_each_mode([&](std::size_t i, const ivec& k) {
            ivec mk{-k[0], -k[1], -k[2]};
            out[i] = rho[i] + std::conj(rho.at(mk));
        });
        ivec zero{0, 0, 0};
        out.at(zero) = cplx(0, 0);
        return out;
    }

  private:
    SpectralField scaled_laplacian(const SpectralField& f) const {
        SpectralField out = f;
        double nu = 0.5 * sigma_ * sigma_ * two_pi * two_pi;
        out.for_each_mode([&](std::size_t i, const ivec& k) {
            out[i] = -nu * inorm2(k, d_) * f[i];
        });
        return out;
    }

    DriftModel model_;
    int d_, kmax_;
    double sigma_;
    std::size_t pad_;
    std::vector<SpectralField> mult_;
};

}  // namespace fluctlab
