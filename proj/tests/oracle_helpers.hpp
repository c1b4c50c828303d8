#pragma once

// Shared independent oracles used by both the unit tests and the
// acceptance suite.

#include <fluctlab/kernels.hpp>

#include <vector>

namespace fluctlab::testing {

// Truncated image-sum kernel tabulated on the midpoint displacement grid
// u = -(j+1/2)/M per axis (d = 2).
inline std::vector<rvec> tabulate_image_kernel_2d(const DriftModel& model, int M) {
    std::vector<rvec> tab(static_cast<std::size_t>(M) * M);
    for (int j0 = 0; j0 < M; ++j0)
        for (int j1 = 0; j1 < M; ++j1)
            tab[static_cast<std::size_t>(j0) * M + j1] =
                model.kper({-(j0 + 0.5) / M, -(j1 + 0.5) / M, 0});
    return tab;
}

// Drift of the one-mode field cos(2 pi k.y) at x via the image sum with the
// singularity subtracted: v(x) = (1/M^2) sum_y K_img(x-y)(w(y) - w(x)).
inline rvec image_sum_drift_2d(const std::vector<rvec>& tab, int M, const ivec& k, const rvec& x) {
    auto mode = [&](double y0, double y1) { return std::cos(two_pi * (k[0] * y0 + k[1] * y1)); };
    double wx = mode(x[0], x[1]);
    rvec acc{};
    for (int j0 = 0; j0 < M; ++j0) {
        for (int j1 = 0; j1 < M; ++j1) {
            double w = mode(x[0] + (j0 + 0.5) / M, x[1] + (j1 + 0.5) / M) - wx;
            const rvec& kv = tab[static_cast<std::size_t>(j0) * M + j1];
            acc[0] += kv[0] * w;
            acc[1] += kv[1] * w;
        }
    }
    acc[0] /= static_cast<double>(M) * M;
    acc[1] /= static_cast<double>(M) * M;
    return acc;
}

inline rvec spectral_drift_of_mode(const DriftModel& model, const ivec& k, const rvec& x) {
    cvec kh = model.multiplier(k);
    double ph = 0;
    for (int a = 0; a < model.d; ++a) ph += k[a] * x[a];
    cplx e = std::polar(1.0, two_pi * ph);
    rvec out{};
    for (int a = 0; a < model.d; ++a) out[a] = (kh[a] * e).real();
    return out;
}

}  // namespace fluctlab::testing
