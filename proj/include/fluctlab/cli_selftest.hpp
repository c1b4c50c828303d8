#pragma once

// `fluctlab selftest`: the quick closed-form checks of every module, one
// line per module. Statistical and Monte-Carlo verification lives in the
// test suite; this is the smoke tier.

#include <iostream>

#include "cli.hpp"

namespace fluctlab::cli {

namespace selftest_detail {

struct Checker {
    int failures = 0;
    void check(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            std::cout << "    FAIL " << what << "\n";
        }
    }
};

}  // namespace selftest_detail

inline int run_selftest(const RunConfig&) {
    using selftest_detail::Checker;
    int failures = 0;
    auto module = [&](const std::string& name, auto&& body) {
        Checker c;
        try {
            body(c);
        } catch (const std::exception& e) {
            ++c.failures;
            std::cout << "    FAIL " << name << " raised: " << e.what() << "\n";
        }
        std::cout << (c.failures ? "FAIL " : "ok   ") << name << "\n";
        failures += c.failures;
    };

    module("spectral", [](Checker& c) {
        SpectralField f(2, 3);
        f.at({0, 0, 0}) = 1.0;
        c.check(std::abs(sobolev_inner(f, f, 2.5).real() - 1.0) < 1e-14, "zero-mode norm");
        SpectralField g(2, 3);
        g.at({1, 0, 0}) = 1.0;
        c.check(std::abs(sobolev_inner(g, g, -1.0).real() - 0.5) < 1e-14, "bracket weight");
        c.check(std::abs(mollify(f, 3).at({0, 0, 0}) - cplx(1, 0)) == 0.0, "mollifier at 0");
        SpectralField one_mode(2, 3);
        one_mode.at({3, 0, 0}) = 1.0;
        c.check(std::abs(mollify(one_mode, 3).at({3, 0, 0})) == 0.0, "mollifier support");
        std::vector<rvec> origin = {{0, 0, 0}};
        SpectralField emp = embed_empirical(origin, 2, 2);
        c.check(std::abs(emp.at({2, -1, 0}) - cplx(1, 0)) < 1e-14, "embedding at origin");
        Grid grid = to_grid(f, 8);
        c.check(std::abs(grid.values[3] - cplx(1, 0)) < 1e-13, "constant grid samples");
    });

    module("kernels", [](Checker& c) {
        DriftModel bs = DriftModel::biot_savart();
        cvec k0 = bs.multiplier({0, 0, 0});
        c.check(std::abs(k0[0]) + std::abs(k0[1]) == 0.0, "mean removal");
        cvec k1 = bs.multiplier({1, 0, 0});
        c.check(std::abs(k1[0] * 1.0) == 0.0, "divergence-free direction");
        DriftModel sine = DriftModel::sine1d(1.0);
        std::vector<rvec> single = {{0.4, 0, 0}};
        c.check(sine.drift_at_particles(single)[0][0] == 0.0, "empty pair sum");
        rvec x{0.2, 0, 0};
        c.check(std::abs(sine.flat_derivative(x, x)[0]) < 1e-14, "smooth self flat derivative");
    });

    module("particles", [](Checker& c) {
        SpectralField uni(1, 2);
        uni.at({0, 0, 0}) = 1.0;
        auto ens = sample_initial(uni, 1, 3, 0);
        c.check(ens.positions.size() == 1 && ens.positions[0][0] >= 0 && ens.positions[0][0] < 1,
                "single draw in the cell");
        DriftModel zero = DriftModel::smooth(1, {});
        double before = ens.positions[0][0];
        step_em(ens, zero, 0.01, 0.0);
        c.check(ens.positions[0][0] == before, "zero drift, zero noise fixed point");
        ParticleEnsemble one;
        one.d = 1;
        one.positions = {{0, 0, 0}};
        SpectralField rho = fluctuation_field(one, uni);
        c.check(std::abs(rho.at({0, 0, 0})) == 0.0 && std::abs(rho.at({1, 0, 0}) - cplx(1, 0)) < 1e-14,
                "origin fluctuation modes");
    });

    module("meanfield", [](Checker& c) {
        DriftModel zero = DriftModel::smooth(1, {});
        FokkerPlanck fp(zero, 1.0, 1, 4);
        SpectralField mu0(1, 4);
        mu0.at({0, 0, 0}) = 1.0;
        mu0.at({1, 0, 0}) = mu0.at({-1, 0, 0}) = 0.25;
        FPState st{mu0, 0.0};
        fp.fp_step(st, 0.1);
        double expect = 0.25 * std::exp(-0.5 * two_pi * two_pi * 0.1);
        c.check(std::abs(st.mu.at({1, 0, 0}).real() - expect) < 1e-12, "exact mode decay");
        c.check(std::abs(st.mu.at({0, 0, 0}) - cplx(1, 0)) == 0.0, "mass conservation");
        MuCurve curve = fp.solve(mu0, {0.0}, 0.01);
        c.check(curve.mus.size() == 1, "t_grid {0} returns mu0");
    });

    module("spde", [](Checker& c) {
        DriftModel zero = DriftModel::smooth(1, {});
        SpdeEngine eng(zero, 1, 4, 1.0);
        FokkerPlanck fp(zero, 1.0, 1, 4);
        SpectralField uni(1, 4);
        uni.at({0, 0, 0}) = 1.0;
        MuCurve curve = fp.solve(uni, {0.0}, 0.01);
        SpectralField cst(1, 4);
        cst.at({0, 0, 0}) = 2.0;
        SpectralField ap = eng.apply_Aprime(0.0, cst, curve);
        double tot = 0;
        for (std::size_t i = 0; i < ap.size(); ++i) tot += std::abs(ap[i]);
        c.check(tot == 0.0, "A' kills constants");
        SpectralField z(1, 4);
        SpectralField az = eng.apply_A(0.0, z, curve);
        tot = 0;
        for (std::size_t i = 0; i < az.size(); ++i) tot += std::abs(az[i]);
        c.check(tot == 0.0, "A at zero");
        NoiseModel nm{1.0, 4};
        rng::Stream rs(1, {rng::tag_spde, 0});
        SpectralField dz = eng.noise_increment(0.0, 0.01, curve, nm, rs, 0);
        c.check(std::abs(dz.at({0, 0, 0})) == 0.0, "noise kills the mean mode");
        SpectralField h(1, 4);
        h.at({1, 0, 0}) = h.at({-1, 0, 0}) = 0.3;
        SpectralField y = eng.linear_flow(h, 0.1, 0.1, 2, curve, 1e-3);
        c.check(std::abs(y.at({1, 0, 0}) - h.at({1, 0, 0})) == 0.0, "identity flow at t=s");
    });

    module("functionals", [](Checker& c) {
        SobolevIndices idx(1, 2.0, 3.5);
        SpectralField phi(1, 4);
        phi.at({1, 0, 0}) = phi.at({-1, 0, 0}) = 0.5;
        CylindricalFunctional lin(OuterMap::linear({1.0}), {phi}, idx);
        SpectralField f(1, 4);
        f.at({1, 0, 0}) = cplx(0.3, 0.1);
        f.at({-1, 0, 0}) = cplx(0.3, -0.1);
        c.check(std::abs(lin.eval(f) - sobolev_inner(f, phi, idx.s_fluct()).real()) < 1e-14,
                "linear eval");
        SpectralField g = lin.gradient(f);
        c.check(std::abs(g.at({1, 0, 0}) - phi.at({1, 0, 0})) == 0.0, "linear gradient");
        SpectralField hz = lin.hessian_apply(f, phi);
        double tot = 0;
        for (std::size_t i = 0; i < hz.size(); ++i) tot += std::abs(hz[i]);
        c.check(tot == 0.0, "linear hessian vanishes");
        CylindricalFunctional bump(OuterMap::gauss_bump({0.0}, 1.0, 2.0), {phi}, idx);
        SpectralField zf(1, 4);
        c.check(std::abs(bump.eval(zf) - 2.0) < 1e-14, "bump at zero");
    });

    module("experiments", [](Checker& c) {
        std::vector<WeakErrorRow> rows;
        for (std::size_t N : {64u, 128u, 256u, 512u}) {
            WeakErrorRow r;
            r.N = N;
            r.gap = 2.0 / std::sqrt(static_cast<double>(N));
            r.gap_se = 1e-13;
            r.usable = true;
            rows.push_back(r);
        }
        RateFit fit = fit_rate_rows(rows);
        c.check(std::abs(fit.slope + 0.5) < 1e-12, "synthetic slope -1/2");
        DriftModel coulomb = DriftModel::coulomb(2);
        SpectralField uni(2, 6);
        uni.at({0, 0, 0}) = 1.0;
        std::vector<rvec> pts = {{0.2, 0.3, 0}, {0.8, 0.6, 0}};
        double fn = modulated_energy(pts, uni, coulomb, 1.0);
        c.check(std::isfinite(fn), "modulated energy finite");
    });

    module("cli", [](Checker& c) {
        std::vector<std::string> errs;
        auto kv = parse_config_text("[domain]\nd = 1\nlambda = 2.0\n", errs);
        c.check(errs.empty() && kv.at("domain.d") == "1", "config text parsing");
        bool rejected = false;
        try {
            resolve_config({{"domain.d", "1"}, {"domain.lambda", "1.4"}});
        } catch (const validation_error& e) {
            rejected = std::string(e.what()).find("lambda > 1.5*d") != std::string::npos;
        }
        c.check(rejected, "lambda constraint cited");
    });

    std::cout << (failures == 0 ? "selftest: all modules ok\n"
                                : "selftest: FAILURES PRESENT\n");
    return failures == 0 ? 0 : 3;
}

}  // namespace fluctlab::cli
