// Minimal tour of the field types and the Fokker-Planck solver: start from
// 1 + 0.5 cos(2 pi x), diffuse, and print the exact-vs-computed first mode.

#include <fluctlab/meanfield.hpp>

#include <cstdio>

using namespace fluctlab;

int main() {
    const int kmax = 16;
    const double sigma = 1.0;
    DriftModel zero = DriftModel::smooth(1, {});
    FokkerPlanck fp(zero, sigma, 1, kmax);

    SpectralField mu0(1, kmax);
    mu0.at({0, 0, 0}) = 1.0;
    mu0.at({1, 0, 0}) = mu0.at({-1, 0, 0}) = 0.25;

    std::printf("   t      c_1(mu_t)      exact\n");
    for (double t : {0.0, 0.05, 0.1, 0.2}) {
        MuCurve curve = fp.solve(mu0, {0.0, std::max(t, 1e-9)}, 1e-3);
        double c1 = curve.mus.back().at({1, 0, 0}).real();
        double exact = 0.25 * std::exp(-0.5 * sigma * sigma * two_pi * two_pi * t);
        std::printf("%5.2f   %.10f   %.10f\n", t, c1, exact);
    }
    return 0;
}
