#include <catch2/catch_amalgamated.hpp>
#include <fluctlab/functionals.hpp>

#include "test_helpers.hpp"

#include <cmath>

using namespace fluctlab;
using fluctlab::testing::random_real_field;

namespace {

SpectralField mode_field(int kmax, int q, double amp) {
    SpectralField f(1, kmax);
    f.at({q, 0, 0}) = amp / 2.0;
    f.at({-q, 0, 0}) = amp / 2.0;
    return f;
}

SpectralField uniform_density(int d, int kmax) {
    SpectralField f(d, kmax);
    f.at({0, 0, 0}) = 1.0;
    return f;
}

CylindricalFunctional tanh_test_functional(const SobolevIndices& idx, int kmax) {
    // amplitudes chosen so the inner products are O(1) against CLT-scale fields
    std::vector<SpectralField> phis = {mode_field(kmax, 1, 16.0), mode_field(kmax, 2, 250.0)};
    return CylindricalFunctional(OuterMap::tanh_product({0.9, 0.8}, {0.2, -0.1}, 1.0), phis, idx);
}

}  // namespace

TEST_CASE("outer maps match finite differences") {
    std::vector<OuterMap> maps = {
        OuterMap::linear({0.7, -1.2}),
        OuterMap::quadratic({1.0, 0.3, 0.3, -0.8}, {0.2, 0.5}, 3.0),
        OuterMap::tanh_product({0.9, 1.3}, {0.1, -0.4}, 2.0),
        OuterMap::gauss_bump({0.3, -0.2}, 1.5, 1.7),
    };
    std::vector<double> z = {0.37, -0.81};
    const double eps = 1e-6;
    for (const auto& g : maps) {
        auto grad = g.grad(z);
        auto hess = g.hess(z);
        for (int i = 0; i < 2; ++i) {
            auto zp = z, zm = z;
            zp[i] += eps;
            zm[i] -= eps;
            double fd = (g.value(zp) - g.value(zm)) / (2 * eps);
            CHECK(grad[i] == Catch::Approx(fd).margin(1e-7));
            for (int j = 0; j < 2; ++j) {
                auto gp = g.grad(zp), gm = g.grad(zm);
                double fd2 = (gp[j] - gm[j]) / (2 * eps);
                CHECK(hess[i * 2 + j] == Catch::Approx(fd2).margin(1e-6));
            }
        }
        // symmetry
        CHECK(hess[1] == Catch::Approx(hess[2]).margin(1e-14));
    }
}

TEST_CASE("eval") {
    SobolevIndices idx(1, 2.0, 3.5);
    rng::Stream rs(1, {rng::tag_test, 80});
    SECTION("linear outer returns the inner product") {
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {mode_field(6, 1, 1.0)}, idx);
        SpectralField f = random_real_field(1, 6, rs, 0);
        CHECK(Phi.eval(f) ==
              Catch::Approx(sobolev_inner(f, mode_field(6, 1, 1.0), idx.s_fluct()).real()));
    }
    SECTION("gauss bump at zero field") {
        CylindricalFunctional Phi(OuterMap::gauss_bump({0.0}, 1.0, 2.5), {mode_field(6, 1, 1.0)}, idx);
        SpectralField zero(1, 6);
        CHECK(Phi.eval(zero) == Catch::Approx(2.5));
    }
    SECTION("compositional oracle") {
        auto Phi = tanh_test_functional(idx, 6);
        SpectralField f = random_real_field(1, 6, rs, 1);
        double z1 = sobolev_inner(f, mode_field(6, 1, 16.0), idx.s_fluct()).real();
        double z2 = sobolev_inner(f, mode_field(6, 2, 250.0), idx.s_fluct()).real();
        double expect = std::tanh(0.9 * z1 + 0.2) * std::tanh(0.8 * z2 - 0.1);
        CHECK(Phi.eval(f) == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("gradient") {
    SobolevIndices idx(1, 2.0, 3.5);
    rng::Stream rs(2, {rng::tag_test, 81});
    SECTION("linear outer has constant gradient phi_1") {
        SpectralField phi = mode_field(6, 1, 2.0);
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {phi}, idx);
        SpectralField f = random_real_field(1, 6, rs, 0);
        SpectralField g = Phi.gradient(f);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - phi[i]) == 0.0);
    }
    SECTION("directional finite difference") {
        auto Phi = tanh_test_functional(idx, 6);
        for (int trial = 0; trial < 5; ++trial) {
            SpectralField f = random_real_field(1, 6, rs, 10 + trial);
            SpectralField h = random_real_field(1, 6, rs, 20 + trial);
            const double eps = 1e-5;
            SpectralField fp = f, fm = f;
            fp += cplx(eps, 0) * h;
            SpectralField eh = cplx(eps, 0) * h;
            fm -= eh;
            double fd = (Phi.eval(fp) - Phi.eval(fm)) / (2 * eps);
            double ip = sobolev_inner(Phi.gradient(f), h, idx.s_fluct()).real();
            CHECK(std::abs(fd - ip) < 1e-6 * (1 + std::abs(ip)));
        }
    }
    SECTION("gradient norm below the C1 probe") {
        auto Phi = tanh_test_functional(idx, 6);
        auto probe = Phi.seminorm_probe(7);
        SpectralField f = random_real_field(1, 6, rs, 33);
        CHECK(sobolev_norm(Phi.gradient(f), idx.s_fluct()) <= probe[0] * (1 + 1e-9));
        CHECK(probe[1] > 0.0);
    }
}

TEST_CASE("hessian") {
    SobolevIndices idx(1, 2.0, 3.5);
    rng::Stream rs(3, {rng::tag_test, 82});
    SECTION("linear outer has zero hessian") {
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {mode_field(6, 1, 1.0)}, idx);
        SpectralField f = random_real_field(1, 6, rs, 0);
        SpectralField h = random_real_field(1, 6, rs, 1);
        SpectralField out = Phi.hessian_apply(f, h);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i]) == 0.0);
    }
    SECTION("symmetry of the quadratic form") {
        auto Phi = tanh_test_functional(idx, 6);
        SpectralField f = random_real_field(1, 6, rs, 2);
        SpectralField h = random_real_field(1, 6, rs, 3);
        SpectralField ht = random_real_field(1, 6, rs, 4);
        double a = sobolev_inner(Phi.hessian_apply(f, h), ht, idx.s_fluct()).real();
        double b = sobolev_inner(Phi.hessian_apply(f, ht), h, idx.s_fluct()).real();
        CHECK(std::abs(a - b) < 1e-12 * (1 + std::abs(a)));
    }
    SECTION("second-order finite difference of eval") {
        auto Phi = tanh_test_functional(idx, 6);
        SpectralField f = random_real_field(1, 6, rs, 5);
        SpectralField h = random_real_field(1, 6, rs, 6);
        const double eps = 1e-4;
        SpectralField fp = f, fm = f;
        SpectralField eh = cplx(eps, 0) * h;
        fp += eh;
        fm -= eh;
        double fd2 = (Phi.eval(fp) - 2 * Phi.eval(f) + Phi.eval(fm)) / (eps * eps);
        double q = sobolev_inner(Phi.hessian_apply(f, h), h, idx.s_fluct()).real();
        CHECK(std::abs(fd2 - q) < 1e-5 * (1 + std::abs(q)));
    }
}

TEST_CASE("spde generator") {
    SobolevIndices idx(1, 2.0, 3.5);
    rng::Stream rs(4, {rng::tag_test, 83});
    DriftModel model = DriftModel::sine1d(0.8);
    const int kmax = 6;
    SpdeEngine eng(model, 1, kmax, 1.0);
    FokkerPlanck fp(model, 1.0, 1, kmax);
    MuCurve uni = fp.solve(uniform_density(1, kmax), {0.0}, 1e-2);

    SECTION("linear outer: no trace, generator is <A_n f, phi_1>") {
        SpectralField phi = mode_field(kmax, 1, 1.0);
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {phi}, idx);
        SpectralField f = random_real_field(1, kmax, rs, 0);
        auto res = generator_spde(Phi, f, 0.0, 4, eng, uni, 2 * kmax);
        CHECK(res.trace_modes == Catch::Approx(0.0).margin(1e-15));
        double expect = sobolev_inner(eng.apply_A_n(0.0, f, 4, uni), phi, idx.s_fluct()).real();
        CHECK(res.value == Catch::Approx(expect).epsilon(1e-12));

        SpectralField zero(1, kmax);
        auto res0 = generator_spde(Phi, zero, 0.0, 4, eng, uni, 2 * kmax);
        CHECK(res0.value == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("two trace paths agree on quadratic outer, uniform mu") {
        CylindricalFunctional Phi(OuterMap::quadratic({0.9, 0.25, 0.25, -0.6}, {0.1, 0.2}, 3.0),
                                  {mode_field(kmax, 1, 16.0), mode_field(kmax, 2, 250.0)}, idx);
        for (int trial = 0; trial < 5; ++trial) {
            SpectralField f = random_real_field(1, kmax, rs, 40 + trial);
            auto res = generator_spde(Phi, f, 0.0, 0, eng, uni, 2 * kmax);
            double scale = std::abs(res.trace_modes) + 1;
            CHECK(std::abs(res.trace_modes - res.trace_diagonal) < 1e-10 * scale);
        }
    }
    SECTION("two trace paths agree on nonuniform mu") {
        SpectralField mu0 = uniform_density(1, kmax);
        mu0.at({1, 0, 0}) = mu0.at({-1, 0, 0}) = 0.2;
        MuCurve curve = fp.solve(mu0, {0.0}, 1e-2);
        auto Phi = tanh_test_functional(idx, kmax);
        for (int trial = 0; trial < 5; ++trial) {
            SpectralField f = random_real_field(1, kmax, rs, 60 + trial);
            auto res = generator_spde(Phi, f, 0.0, 0, eng, curve, 2 * kmax);
            double scale = std::abs(res.trace_modes) + 1;
            CHECK(std::abs(res.trace_modes - res.trace_diagonal) < 1e-10 * scale);
        }
    }
    SECTION("time finite difference of E Phi(rho^n) matches E[generator]") {
        auto Phi = tanh_test_functional(idx, kmax);
        NoiseModel nm{1.0, kmax};
        const int replicas = 1500;
        const double dt = 2e-3, t = 0.05, delta = 5 * dt;
        const int n = 4;
        double gen_acc = 0;
        std::vector<double> phi_t(replicas), phi_d(replicas), phi_d2(replicas);
        for (int r = 0; r < replicas; ++r) {
            GalerkinState st;
            st.rho = eng.sample_rho0(uni.mus.front(),
                                     rng::Stream(901, {rng::tag_spde, static_cast<uint64_t>(r)}), 0);
            st.n_mollify = n;
            st.indices = idx;
            st.L_noise = kmax;
            rng::Stream stream(902, {rng::tag_spde, static_cast<uint64_t>(r)});
            while (st.t < t - 1e-12) eng.step(st, dt, uni, nm, stream);
            phi_t[r] = Phi.eval(st.rho);
            gen_acc += generator_spde(Phi, st.rho, st.t, n, eng, uni, 2 * kmax).value;
            while (st.t < t + delta - 1e-12) eng.step(st, dt, uni, nm, stream);
            phi_d[r] = Phi.eval(st.rho);
            while (st.t < t + 2 * delta - 1e-12) eng.step(st, dt, uni, nm, stream);
            phi_d2[r] = Phi.eval(st.rho);
        }
        gen_acc /= replicas;
        double fd = 0, fd2 = 0, var = 0;
        for (int r = 0; r < replicas; ++r) {
            fd += (phi_d[r] - phi_t[r]) / delta;
            fd2 += (phi_d2[r] - phi_d[r]) / delta;
        }
        fd /= replicas;
        fd2 /= replicas;
        for (int r = 0; r < replicas; ++r)
            var += std::pow((phi_d[r] - phi_t[r]) / delta - fd, 2);
        double se = std::sqrt(var / replicas / (replicas - 1.0));
        double slack = std::abs(fd2 - fd);  // first-order-in-delta bias scale
        CHECK(std::abs(fd - gen_acc) < 5 * se + 1.5 * slack + 1e-4);
    }
}

TEST_CASE("particle generator") {
    SobolevIndices idx(1, 2.0, 3.5);
    const int kmax = 6;
    SpectralField uni = uniform_density(1, kmax);

    SECTION("single particle closed form: linear outer, zero drift") {
        DriftModel zero = DriftModel::smooth(1, {});
        double sigma = 1.2;
        int q = 2;
        SpectralField phi = mode_field(kmax, q, 1.0);
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {phi}, idx);
        ParticleEnsemble ens;
        ens.d = 1;
        ens.positions = {{0.318, 0, 0}};
        double got = generator_particle(Phi, ens, uni, 0.0, zero, sigma);
        // (sigma^2/2) Lap phi-hat at X
        double w = std::pow(1.0 + q * q, idx.s_fluct());
        double expect = -0.5 * sigma * sigma * two_pi * two_pi * q * q * w *
                        std::cos(two_pi * q * ens.positions[0][0]);
        CHECK(got == Catch::Approx(expect).epsilon(1e-10));
    }
    SECTION("linear outer, zero drift reduces to the diffusion pairing") {
        DriftModel zero = DriftModel::smooth(1, {});
        double sigma = 0.9;
        SpectralField phi = mode_field(kmax, 1, 1.0);
        CylindricalFunctional Phi(OuterMap::linear({1.0}), {phi}, idx);
        auto ens = sample_initial(uni, 32, 5, 0);
        double got = generator_particle(Phi, ens, uni, 0.0, zero, sigma);
        SpectralField rho = fluctuation_field(ens, uni);
        SpectralField lap_hat = laplacian(Phi.phi_hats()[0]);
        double expect = 0.5 * sigma * sigma * dual_pair(rho, lap_hat).real();
        CHECK(got == Catch::Approx(expect).epsilon(1e-10));
    }
    SECTION("time finite difference of E Phi(rho^N) matches E[generator]") {
        DriftModel model = DriftModel::sine1d(0.8);
        double sigma = 1.0;
        auto Phi = tanh_test_functional(idx, kmax);
        const int replicas = 2000;
        const std::size_t N = 64;
        const double dt = 2e-3, t = 0.05, delta = 5 * dt;
        double gen_acc = 0;
        std::vector<double> phi_t(replicas), phi_d(replicas), phi_d2(replicas);
        for (int r = 0; r < replicas; ++r) {
            auto ens = sample_initial(uni, N, 7001, static_cast<uint64_t>(r));
            ens.stream = rng::Stream(7002, {rng::tag_particles, static_cast<uint64_t>(r)});
            while (ens.t < t - 1e-12) step_em(ens, model, dt, sigma);
            phi_t[r] = Phi.eval(fluctuation_field(ens, uni));
            gen_acc += generator_particle(Phi, ens, uni, ens.t, model, sigma);
            while (ens.t < t + delta - 1e-12) step_em(ens, model, dt, sigma);
            phi_d[r] = Phi.eval(fluctuation_field(ens, uni));
            while (ens.t < t + 2 * delta - 1e-12) step_em(ens, model, dt, sigma);
            phi_d2[r] = Phi.eval(fluctuation_field(ens, uni));
        }
        gen_acc /= replicas;
        double fd = 0, fd2 = 0, var = 0;
        for (int r = 0; r < replicas; ++r) {
            fd += (phi_d[r] - phi_t[r]) / delta;
            fd2 += (phi_d2[r] - phi_d[r]) / delta;
        }
        fd /= replicas;
        fd2 /= replicas;
        for (int r = 0; r < replicas; ++r)
            var += std::pow((phi_d[r] - phi_t[r]) / delta - fd, 2);
        double se = std::sqrt(var / replicas / (replicas - 1.0));
        double slack = std::abs(fd2 - fd);
        CHECK(std::abs(fd - gen_acc) < 5 * se + 1.5 * slack + 1e-4);
    }
}
