#pragma once

// Pseudo-spectral solver for the nonlinear Fokker-Planck equation
//
//     d/dt mu = (sigma^2/2) Lap mu - div( (K*mu) mu ).
//
// Diffusion is applied exactly per mode through the integrating factor
// exp(-(sigma^2/2)(2 pi |k|)^2 dt); the transport term is evaluated
// pseudo-spectrally (multiplier for K*mu, product on the 3/2-padded grid,
// divergence by multiplier) with explicit Euler. c_0 is conserved exactly.

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "kernels.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct FPState {
    SpectralField mu;
    double t = 0.0;
};

// Cached limit curve t -> (mu_t, (sqrt mu_t)^): immutable once produced.
struct MuCurve {
    std::vector<double> times;
    std::vector<SpectralField> mus;
    std::vector<SpectralField> sqrt_hats;
    bool stationary = false;

    std::size_t index_of(double t) const {
        if (stationary) return 0;
        // nearest cached time; the SPDE driver requests its own step grid
        auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i >= times.size()) i = times.size() - 1;
        if (i > 0 && std::abs(times[i - 1] - t) < std::abs(times[i] - t)) --i;
        if (std::abs(times[i] - t) > 1e-7 * (1.0 + std::abs(t)))
            throw domain_error("MuCurve: time " + std::to_string(t) + " not cached");
        return i;
    }

    const SpectralField& mu_at(double t) const { return mus[index_of(t)]; }
    const SpectralField& sqrt_at(double t) const { return sqrt_hats[index_of(t)]; }
};

class FokkerPlanck {
  public:
    FokkerPlanck(const DriftModel& model, double sigma, int d, int kmax)
        : model_(model), sigma_(sigma), d_(d), kmax_(kmax), pad_(padded_grid_size(kmax)) {
        SpectralField probe(d, kmax);
        mult_.assign(static_cast<std::size_t>(d), SpectralField(d, kmax));
        probe.for_each_mode([&](std::size_t i, const ivec& k) {
            cvec kh = model.multiplier(k);
            for (int a = 0; a < d; ++a) mult_[static_cast<std::size_t>(a)][i] = kh[a];
        });
    }

    double sigma() const { return sigma_; }

    // -div((K*mu) mu), dealiased.
    SpectralField transport(const SpectralField& mu) const {
        Grid mu_grid = to_grid(mu, pad_);
        SpectralField out(d_, kmax_);
        for (int a = 0; a < d_; ++a) {
            SpectralField ba(d_, kmax_);
            for (std::size_t i = 0; i < ba.size(); ++i)
                ba[i] = mult_[static_cast<std::size_t>(a)][i] * mu[i];
            Grid bg = to_grid(ba, pad_);
            for (std::size_t i = 0; i < bg.values.size(); ++i) bg.values[i] *= mu_grid.values[i];
            SpectralField flux = from_grid(bg, kmax_);
            out.for_each_mode([&](std::size_t i, const ivec& k) {
                out[i] -= cplx(0, two_pi * k[a]) * flux[i];
            });
        }
        return out;
    }

    // Full right-hand side; its negative Sobolev norm is the steady-state
    // residual diagnostic.
    SpectralField rhs(const SpectralField& mu) const {
        SpectralField r = transport(mu);
        double nu = 0.5 * sigma_ * sigma_ * two_pi * two_pi;
        r.for_each_mode([&](std::size_t i, const ivec& k) {
            r[i] += -nu * inorm2(k, d_) * mu[i];
        });
        return r;
    }

    // Exponential-Euler step: diffusion through the exact per-mode factor,
    // transport explicit with the phi1 weight (1-e^{-z})/z so that discrete
    // fixed points solve the steady equation exactly.
    void fp_step(FPState& st, double dt) const {
        if (!(dt > 0)) throw domain_error("fp_step: dt > 0 required");
        SpectralField tr = transport(st.mu);
        double nu = 0.5 * sigma_ * sigma_ * two_pi * two_pi;
        st.mu.for_each_mode([&](std::size_t i, const ivec& k) {
            double z = nu * inorm2(k, d_) * dt;
            double decay = std::exp(-z);
            double phi1 = z > 1e-12 ? (1.0 - decay) / z : 1.0 - 0.5 * z;
            cplx next = st.mu[i] * decay + dt * phi1 * tr[i];
            if (!std::isfinite(next.real()) || !std::isfinite(next.imag()))
                throw instability_error("fp_step: non-finite coefficient at mode " + ivec_str(k, d_));
            st.mu[i] = next;
        });
        st.t += dt;
    }

    // March to the requested output times (strictly increasing from 0) and
    // cache (sqrt mu)^ alongside. Negativity beyond tol_pos raises unless
    // warn_only.
    MuCurve solve(const SpectralField& mu0, const std::vector<double>& t_grid, double dt,
                  bool warn_only = false, double tol_pos = 1e-8) const {
        if (t_grid.empty() || t_grid.front() != 0.0)
            throw domain_error("solve_fp: t_grid must start at 0");
        for (std::size_t i = 1; i < t_grid.size(); ++i)
            if (!(t_grid[i] > t_grid[i - 1]))
                throw domain_error("solve_fp: t_grid must be strictly increasing");
        ivec zero{0, 0, 0};
        if (std::abs(mu0.at(zero) - cplx(1, 0)) > 1e-12)
            throw domain_error("solve_fp: mu0 must have c_0 = 1");

        MuCurve curve;
        // uniform initial data is a fixed point (the multiplier vanishes at 0)
        bool uniform = true;
        mu0.for_each_mode([&](std::size_t i, const ivec& k) {
            if (inorm2(k, d_) > 0 && std::abs(mu0[i]) > 0) uniform = false;
        });
        if (uniform) {
            curve.stationary = true;
            curve.times = {0.0};
            curve.mus = {mu0};
            curve.sqrt_hats = {sqrt_hat(mu0, warn_only, tol_pos)};
            return curve;
        }

        FPState st{mu0, 0.0};
        curve.times.reserve(t_grid.size());
        for (double target : t_grid) {
            while (st.t < target - 1e-12) {
                double step = std::min(dt, target - st.t);
                fp_step(st, step);
            }
            monitor_positivity(st.mu, warn_only, tol_pos);
            curve.times.push_back(target);
            curve.mus.push_back(st.mu);
            curve.sqrt_hats.push_back(sqrt_hat(st.mu, warn_only, tol_pos));
        }
        return curve;
    }

    SpectralField sqrt_hat(const SpectralField& mu, bool warn_only, double tol_pos) const {
        monitor_positivity(mu, warn_only, tol_pos);
        Grid g = to_grid(mu, pad_);
        for (auto& v : g.values) v = std::sqrt(std::max(0.0, v.real()));
        return from_grid(g, kmax_);
    }

    void monitor_positivity(const SpectralField& mu, bool warn_only, double tol_pos) const {
        Grid g = to_grid(mu, pad_);
        double lo = 0;
        for (auto& v : g.values) lo = std::min(lo, v.real());
        if (lo < -tol_pos && !warn_only)
            throw positivity_error("fokker-planck density dipped to " + std::to_string(lo));
    }

  private:
    DriftModel model_;
    double sigma_;
    int d_, kmax_;
    std::size_t pad_;
    std::vector<SpectralField> mult_;
};

}  // namespace fluctlab
