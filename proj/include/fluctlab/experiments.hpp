#pragma once

// Monte-Carlo orchestration: weak-error curves over N with log-log rate
// fits, the b = 0 CLT baseline, the Coulomb modulated energy, and
// refinement studies over (kmax, L, n, dt). Every reported mean carries a
// standard error; fits carry bootstrap confidence intervals; the SPDE-side
// estimate is computed once per curve and reused across N rows.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "common.hpp"
#include "functionals.hpp"
#include "kernels.hpp"
#include "meanfield.hpp"
#include "parallel.hpp"
#include "particles.hpp"
#include "rng.hpp"
#include "spde.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct MeanSe {
    double mean = 0;
    double se = 0;
    std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    out.n = v.size();
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    return out;
}

struct WeakErrorRow {
    std::size_t N = 0;
    double est_particle = 0, se_particle = 0;
    double est_spde = 0, se_spde = 0;
    double gap = 0, gap_se = 0;
    int replicas = 0;
    bool usable = false;  // |gap| > 2 gap_se
};

struct RateFit {
    double slope = 0, intercept = 0, r2 = 0;
    double ci_lo = 0, ci_hi = 0;
    int usable_rows = 0;
};

// Monte-Carlo problem description shared by the experiment drivers.
struct McSetup {
    int d = 1;
    int kmax = 8;
    SobolevIndices idx;
    DriftModel model;
    double sigma = 1.0;
    double t_final = 0.25;
    double dt = 5e-4;
    int L_noise = 8;
    int n_mollify = 0;
    bool rho0_gaussian = true;  // mode (b); false = zero initial field
    SpectralField mu0;
    uint64_t seed = 1;
    int threads = 1;
};

namespace detail {

inline std::size_t step_count(double t_final, double dt) {
    auto n = static_cast<std::size_t>(std::llround(t_final / dt));
    if (n < 1 || std::abs(static_cast<double>(n) * dt - t_final) > 1e-9 * (1 + t_final))
        throw domain_error("t_final must be an integer multiple of dt");
    return n;
}

inline MuCurve build_curve(const McSetup& s) {
    FokkerPlanck fp(s.model, s.sigma, s.d, s.kmax);
    std::size_t steps = step_count(s.t_final, s.dt);
    std::vector<double> tg(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) tg[i] = static_cast<double>(i) * s.dt;
    return fp.solve(s.mu0, tg, s.dt);
}

}  // namespace detail

// One particle-side replica: simulate to t_final, return Phi(rho^N_t).
inline double particle_replica_phi(const McSetup& s, const CylindricalFunctional& Phi,
                                   const MuCurve& curve, std::size_t N, uint64_t replica) {
    auto ens = sample_initial(s.mu0, N, s.seed, replica, s.model.singular());
    ens.stream = rng::Stream(s.seed, {rng::tag_particles, replica});
    std::size_t steps = detail::step_count(s.t_final, s.dt);
    for (std::size_t q = 0; q < steps; ++q) step_em(ens, s.model, s.dt, s.sigma);
    return Phi.eval(fluctuation_field(ens, curve.mu_at(s.t_final)));
}

// One SPDE-side replica: independent randomness from the particle side.
inline double spde_replica_phi(const McSetup& s, const CylindricalFunctional& Phi,
                               const SpdeEngine& eng, const MuCurve& curve, uint64_t replica) {
    GalerkinState st;
    st.indices = s.idx;
    st.n_mollify = s.n_mollify;
    st.L_noise = s.L_noise;
    if (s.rho0_gaussian)
        st.rho = eng.sample_rho0(s.mu0, rng::Stream(s.seed, {rng::tag_spde, replica, 1}), 0);
    else
        st.rho = SpectralField(s.d, s.kmax);
    rng::Stream stream(s.seed, {rng::tag_spde, replica, 2});
    NoiseModel nm{s.sigma, s.L_noise};
    std::size_t steps = detail::step_count(s.t_final, s.dt);
    for (std::size_t q = 0; q < steps; ++q) eng.step(st, s.dt, curve, nm, stream);
    return Phi.eval(st.rho);
}

struct WeakErrorResult {
    std::vector<WeakErrorRow> rows;
    std::vector<std::vector<double>> particle_vals;  // per N row
    std::vector<double> spde_vals;                   // shared pool
};

inline WeakErrorResult weak_error_curve(const McSetup& s, const CylindricalFunctional& Phi,
                                        const std::vector<std::size_t>& N_list,
                                        int replicas_particle, int replicas_spde) {
    WeakErrorResult out;
    MuCurve curve = detail::build_curve(s);
    SpdeEngine eng(s.model, s.d, s.kmax, s.sigma);

    out.spde_vals.assign(static_cast<std::size_t>(replicas_spde), 0.0);
    parallel_for(static_cast<std::size_t>(replicas_spde), s.threads, [&](std::size_t r) {
        out.spde_vals[r] = spde_replica_phi(s, Phi, eng, curve, static_cast<uint64_t>(r));
    });
    MeanSe spde = mean_se(out.spde_vals);

    for (std::size_t row = 0; row < N_list.size(); ++row) {
        std::size_t N = N_list[row];
        std::vector<double> vals(static_cast<std::size_t>(replicas_particle), 0.0);
        parallel_for(vals.size(), s.threads, [&](std::size_t r) {
            // replica ids disjoint across rows so pools are independent
            uint64_t rep = static_cast<uint64_t>(r) + (static_cast<uint64_t>(row) << 32);
            vals[r] = particle_replica_phi(s, Phi, curve, N, rep);
        });
        MeanSe part = mean_se(vals);
        WeakErrorRow wr;
        wr.N = N;
        wr.est_particle = part.mean;
        wr.se_particle = part.se;
        wr.est_spde = spde.mean;
        wr.se_spde = spde.se;
        wr.gap = part.mean - spde.mean;
        wr.gap_se = std::sqrt(part.se * part.se + spde.se * spde.se);
        wr.replicas = replicas_particle;
        wr.usable = std::abs(wr.gap) > 2.0 * wr.gap_se;
        out.rows.push_back(wr);
        out.particle_vals.push_back(std::move(vals));
    }
    return out;
}

// Ordinary least squares of log|gap| on log N over the usable rows.
inline RateFit fit_rate_rows(const std::vector<WeakErrorRow>& rows) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
        if (!r.usable || r.gap == 0.0) continue;
        x.push_back(std::log(static_cast<double>(r.N)));
        y.push_back(std::log(std::abs(r.gap)));
    }
    if (x.size() < 3)
        throw insufficient_data_error("fit_rate: need at least 3 usable rows, have " +
                                      std::to_string(x.size()));
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.usable_rows = static_cast<int>(x.size());
    fit.ci_lo = fit.ci_hi = fit.slope;
    return fit;
}

// Bootstrap over replicas: resample both replica pools, rebuild the gaps on
// the fixed usability mask, refit.
inline RateFit fit_rate(const WeakErrorResult& res, uint64_t seed, int resamples = 1000) {
    RateFit fit = fit_rate_rows(res.rows);
    rng::Stream rs(seed, {rng::tag_bootstrap, 1});
    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        std::vector<WeakErrorRow> rows = res.rows;
        // resample spde pool
        const auto& sv = res.spde_vals;
        double sm = 0;
        uint64_t page = static_cast<uint64_t>(b);
        for (std::size_t i = 0; i < sv.size(); ++i) {
            std::size_t j = static_cast<std::size_t>(rs.uniform_at(page, i) * static_cast<double>(sv.size()));
            sm += sv[std::min(j, sv.size() - 1)];
        }
        sm /= static_cast<double>(sv.size());
        for (std::size_t row = 0; row < rows.size(); ++row) {
            const auto& pv = res.particle_vals[row];
            double pm = 0;
            uint64_t page2 = (static_cast<uint64_t>(b) << 16) | (row + 1);
            for (std::size_t i = 0; i < pv.size(); ++i) {
                std::size_t j =
                    static_cast<std::size_t>(rs.uniform_at(page2, i) * static_cast<double>(pv.size()));
                pm += pv[std::min(j, pv.size() - 1)];
            }
            pm /= static_cast<double>(pv.size());
            rows[row].gap = pm - sm;
        }
        // fixed mask from the point fit
        std::vector<double> x, y;
        for (const auto& r : rows) {
            if (!r.usable || r.gap == 0.0) continue;
            x.push_back(std::log(static_cast<double>(r.N)));
            y.push_back(std::log(std::abs(r.gap)));
        }
        if (x.size() < 2) continue;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(x.size());
        my /= static_cast<double>(x.size());
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        slopes.push_back(sxy / sxx);
    }
    if (!slopes.empty()) {
        std::sort(slopes.begin(), slopes.end());
        auto pick = [&](double q) {
            double pos = q * static_cast<double>(slopes.size() - 1);
            return slopes[static_cast<std::size_t>(pos)];
        };
        fit.ci_lo = pick(0.025);
        fit.ci_hi = pick(0.975);
    }
    return fit;
}

// ---------------------------------------------------------------------------
// CLT baseline (b = 0)

struct CltRow {
    std::size_t N = 0;
    double var_particle = 0, se_particle = 0;
    double var_spde = 0, se_spde = 0;
    double target = 0;
    double z_particle = 0, z_spde = 0;
};

// Variance of <rho, phi> on both sides against the i.i.d. quadrature value
// Var_{mu_t}(phi(X_t)).
inline std::vector<CltRow> clt_baseline(const McSetup& s, const SpectralField& phi,
                                        const std::vector<std::size_t>& N_list, int replicas) {
    if (s.model.singular() || !s.model.table.empty())
        throw domain_error("clt_baseline: drift must be zero");
    MuCurve curve = detail::build_curve(s);
    SpdeEngine eng(s.model, s.d, s.kmax, s.sigma);
    const SpectralField& mu_t = curve.mu_at(s.t_final);

    // quadrature target
    std::size_t pad = padded_grid_size(s.kmax);
    Grid pg = to_grid(phi, pad);
    Grid mg = to_grid(mu_t, pad);
    Grid p2 = pg;
    for (std::size_t i = 0; i < p2.values.size(); ++i) p2.values[i] *= pg.values[i];
    double m1 = grid_quadrature(pg, mg);
    double target = grid_quadrature(p2, mg) - m1 * m1;

    auto variance_stats = [](const std::vector<double>& v, double& var, double& se) {
        MeanSe ms = mean_se(v);
        double m2 = 0, m4 = 0;
        for (double x : v) {
            double c = (x - ms.mean) * (x - ms.mean);
            m2 += c;
            m4 += c * c;
        }
        m2 /= static_cast<double>(v.size());
        m4 /= static_cast<double>(v.size());
        var = m2;
        se = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(v.size()));
    };

    // spde side once
    std::vector<double> sv(static_cast<std::size_t>(replicas), 0.0);
    NoiseModel nm{s.sigma, s.L_noise};
    std::size_t steps = detail::step_count(s.t_final, s.dt);
    parallel_for(sv.size(), s.threads, [&](std::size_t r) {
        GalerkinState st;
        st.indices = s.idx;
        st.L_noise = s.L_noise;
        st.rho = eng.sample_rho0(s.mu0, rng::Stream(s.seed, {rng::tag_spde, r, 1}), 0);
        rng::Stream stream(s.seed, {rng::tag_spde, r, 2});
        for (std::size_t q = 0; q < steps; ++q) eng.step(st, s.dt, curve, nm, stream);
        sv[r] = dual_pair(st.rho, phi).real();
    });
    double var_s, se_s;
    variance_stats(sv, var_s, se_s);

    std::vector<CltRow> rows;
    for (std::size_t row = 0; row < N_list.size(); ++row) {
        std::size_t N = N_list[row];
        std::vector<double> pv(static_cast<std::size_t>(replicas), 0.0);
        parallel_for(pv.size(), s.threads, [&](std::size_t r) {
            uint64_t rep = static_cast<uint64_t>(r) + (static_cast<uint64_t>(row) << 32);
            auto ens = sample_initial(s.mu0, N, s.seed, rep);
            ens.stream = rng::Stream(s.seed, {rng::tag_particles, rep});
            for (std::size_t q = 0; q < steps; ++q) step_em(ens, s.model, s.dt, s.sigma);
            pv[r] = dual_pair(fluctuation_field(ens, mu_t), phi).real();
        });
        CltRow cr;
        cr.N = N;
        variance_stats(pv, cr.var_particle, cr.se_particle);
        cr.var_spde = var_s;
        cr.se_spde = se_s;
        cr.target = target;
        cr.z_particle = (cr.var_particle - target) / cr.se_particle;
        cr.z_spde = (var_s - target) / se_s;
        rows.push_back(cr);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Coulomb modulated energy

// F_N = (1/sigma^2) [ (1/N^2) sum_{i!=j} G_per(x_i-x_j)
//                     - (2/N) sum_i (G*mu)(x_i) + <G*mu, mu> ]
// with G from the (mean-zero) potential multiplier on mu's lattice. The
// pair sum is evaluated through the empirical coefficients, which is the
// same value as the direct double sum of the bandlimited G_per.
inline double modulated_energy(const std::vector<rvec>& points, const SpectralField& mu,
                               const DriftModel& model, double sigma) {
    if (model.variant != DriftModel::Variant::CoulombGradient)
        throw domain_error("modulated_energy: Coulomb model required");
    const int d = mu.dim();
    const std::size_t N = points.size();
    if (N < 2) throw domain_error("modulated_energy: need at least two points");
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            bool eq = true;
            for (int a = 0; a < d; ++a) eq = eq && (points[i][a] == points[j][a]);
            if (eq)
                throw singularity_error("modulated_energy: points " + std::to_string(i) + " and " +
                                        std::to_string(j) + " coincide");
        }
    SpectralField emp = embed_empirical(points, d, mu.kmax());
    double pair_sum = 0, g0 = 0, cross = 0, gmumu = 0;
    SpectralField gmu(d, mu.kmax());
    emp.for_each_mode([&](std::size_t i, const ivec& k) {
        if (inorm2(k, d) == 0) return;
        double gh = model.potential_multiplier(k);
        pair_sum += gh * std::norm(emp[i]);
        g0 += gh;
        gmu[i] = gh * mu[i];
        gmumu += gh * std::norm(mu[i]);
    });
    pair_sum -= g0 / static_cast<double>(N);
    for (const rvec& x : points) {
        PointEvaluator pe(d, mu.kmax(), x);
        cross += pe.eval_real(gmu);
    }
    cross *= 2.0 / static_cast<double>(N);
    return (pair_sum - cross + gmumu) / (sigma * sigma);
}

struct EnergyRow {
    std::size_t N = 0;
    double mean = 0, se = 0;
    double mean_abs = 0, se_abs = 0;
    int replicas = 0;
};

// i.i.d. sampling experiment: per N, replicas of F_N for points drawn from
// mu. Decay is fitted on E|F_N| (for uniform mu the signed mean vanishes
// identically, see the notes in the experiment reports).
inline std::vector<EnergyRow> modulated_energy_experiment(const McSetup& s,
                                                          const std::vector<std::size_t>& N_list,
                                                          int replicas) {
    std::vector<EnergyRow> rows;
    for (std::size_t row = 0; row < N_list.size(); ++row) {
        std::size_t N = N_list[row];
        std::vector<double> vals(static_cast<std::size_t>(replicas), 0.0);
        parallel_for(vals.size(), s.threads, [&](std::size_t r) {
            uint64_t rep = static_cast<uint64_t>(r) + (static_cast<uint64_t>(row) << 32);
            auto ens = sample_initial(s.mu0, N, s.seed, rep, true);
            vals[r] = modulated_energy(ens.positions, s.mu0, s.model, s.sigma);
        });
        EnergyRow er;
        er.N = N;
        er.replicas = replicas;
        MeanSe ms = mean_se(vals);
        er.mean = ms.mean;
        er.se = ms.se;
        std::vector<double> av(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) av[i] = std::abs(vals[i]);
        MeanSe ma = mean_se(av);
        er.mean_abs = ma.mean;
        er.se_abs = ma.se;
        rows.push_back(er);
    }
    return rows;
}

inline RateFit fit_energy_decay(const std::vector<EnergyRow>& rows) {
    std::vector<WeakErrorRow> proxy;
    for (const auto& r : rows) {
        WeakErrorRow w;
        w.N = r.N;
        w.gap = r.mean_abs;
        w.gap_se = r.se_abs;
        w.usable = r.mean_abs > 2 * r.se_abs;
        proxy.push_back(w);
    }
    return fit_rate_rows(proxy);
}

// Bootstrap CI for the energy-decay exponent: multiplicative resampling of
// the per-row relative errors.
inline RateFit fit_energy_decay_bootstrap(const std::vector<EnergyRow>& rows, uint64_t seed,
                                          int resamples = 1000) {
    RateFit fit = fit_energy_decay(rows);
    rng::Stream rs(seed, {rng::tag_bootstrap, 2});
    std::vector<double> slopes;
    for (int b = 0; b < resamples; ++b) {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!(rows[i].mean_abs > 2 * rows[i].se_abs)) continue;
            double noise = rs.gaussian_at(static_cast<uint64_t>(b), i);
            double val = rows[i].mean_abs + noise * rows[i].se_abs;
            if (val <= 0) continue;
            x.push_back(std::log(static_cast<double>(rows[i].N)));
            y.push_back(std::log(val));
        }
        if (x.size() < 3) continue;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(x.size());
        my /= static_cast<double>(x.size());
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        slopes.push_back(sxy / sxx);
    }
    if (!slopes.empty()) {
        std::sort(slopes.begin(), slopes.end());
        fit.ci_lo = slopes[static_cast<std::size_t>(0.025 * static_cast<double>(slopes.size() - 1))];
        fit.ci_hi = slopes[static_cast<std::size_t>(0.975 * static_cast<double>(slopes.size() - 1))];
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Refinement study

struct RefinementLevel {
    int kmax = 0, L = 0, n = 0;
    double dt = 0;
    double estimate = 0, se = 0;
    double diff_prev = 0;  // |estimate - previous estimate|
    bool stall = false;
};

inline std::vector<RefinementLevel> refinement_study(
    const McSetup& base, const std::function<CylindricalFunctional(int)>& phi_factory,
    const std::vector<std::array<double, 4>>& ladder /* kmax, L, n, dt */, int replicas) {
    std::vector<RefinementLevel> out;
    for (std::size_t lev = 0; lev < ladder.size(); ++lev) {
        McSetup s = base;
        s.kmax = static_cast<int>(ladder[lev][0]);
        s.L_noise = static_cast<int>(ladder[lev][1]);
        s.n_mollify = static_cast<int>(ladder[lev][2]);
        s.dt = ladder[lev][3];
        // embed mu0 on the level lattice
        SpectralField mu0(s.d, s.kmax);
        base.mu0.for_each_mode([&](std::size_t, const ivec& k) {
            if (mu0.in_lattice(k)) mu0.at(k) = base.mu0.at(k);
        });
        s.mu0 = mu0;
        CylindricalFunctional Phi = phi_factory(s.kmax);
        MuCurve curve = detail::build_curve(s);
        SpdeEngine eng(s.model, s.d, s.kmax, s.sigma);
        std::vector<double> vals(static_cast<std::size_t>(replicas), 0.0);
        parallel_for(vals.size(), s.threads, [&](std::size_t r) {
            vals[r] = spde_replica_phi(s, Phi, eng, curve, static_cast<uint64_t>(r));
        });
        MeanSe ms = mean_se(vals);
        RefinementLevel rl;
        rl.kmax = s.kmax;
        rl.L = s.L_noise;
        rl.n = s.n_mollify;
        rl.dt = s.dt;
        rl.estimate = ms.mean;
        rl.se = ms.se;
        if (lev > 0) {
            rl.diff_prev = std::abs(rl.estimate - out.back().estimate);
            double noise = 2.0 * std::sqrt(rl.se * rl.se + out.back().se * out.back().se);
            if (lev > 1 && rl.diff_prev > out.back().diff_prev && rl.diff_prev > noise)
                rl.stall = true;
        }
        out.push_back(rl);
    }
    return out;
}

}  // namespace fluctlab
