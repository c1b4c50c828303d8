#pragma once

// Euler-Maruyama integration of the interacting particle system on the
// torus, initial sampling, and the fluctuation field sqrt(N)(mu^N - mu).
//
// Randomness is fully counter-addressed: the stream key is
// (master_seed, tag_particles, replica_id) and each draw is indexed by
// (step, particle, axis), so thread schedules cannot change trajectories
// and permuting particle sub-streams permutes trajectories identically.

#include <algorithm>
#include <cmath>
#include <vector>

#include "common.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace fluctlab {

struct ParticleEnsemble {
    int d = 1;
    std::vector<rvec> positions;
    double t = 0.0;
    uint64_t replica_id = 0;
    rng::Stream stream;
    uint64_t step_index = 0;

    std::size_t count() const { return positions.size(); }
};

inline double wrap01(double x) { return x - std::floor(x); }

// i.i.d. draws by rejection against the grid-evaluated density (piecewise
// constant on an M^d grid) with envelope max over the grid.
inline ParticleEnsemble sample_initial(const SpectralField& density, std::size_t N,
                                       uint64_t master_seed, uint64_t replica_id,
                                       bool require_distinct = false) {
    if (N < 1) throw domain_error("sample_initial: N >= 1 required");
    int d = density.dim();
    ivec zero{0, 0, 0};
    if (std::abs(density.at(zero) - cplx(1, 0)) > 1e-12)
        throw domain_error("sample_initial: density must have c_0 = 1");
    if (density.hermitian_defect() > 1e-10)
        throw domain_error("sample_initial: density must be real-valued");

    std::size_t M = fft::next_pow2(static_cast<std::size_t>(8 * (2 * density.kmax() + 1)));
    if (d == 3) M = std::min<std::size_t>(M, 128);
    Grid g = to_grid(density, M);
    double lo = 0, hi = 0;
    for (auto& v : g.values) {
        lo = std::min(lo, v.real());
        hi = std::max(hi, v.real());
    }
    if (lo < -1e-10)
        throw domain_error("sample_initial: density has negative grid values (min " +
                           std::to_string(lo) + ")");
    if (hi <= 0) throw domain_error("sample_initial: density vanishes on the grid");

    ParticleEnsemble ens;
    ens.d = d;
    ens.replica_id = replica_id;
    ens.stream = rng::Stream(master_seed, {rng::tag_init, replica_id});
    ens.positions.resize(N);

    for (std::size_t i = 0; i < N; ++i) {
        for (uint64_t attempt = 0;; ++attempt) {
            rng::Sequence seq(ens.stream, (static_cast<uint64_t>(i) << 24) | attempt);
            rvec x{};
            std::size_t cell = 0;
            for (int a = 0; a < d; ++a) {
                double u = seq.uniform();
                double scaled = u * static_cast<double>(M);
                std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(scaled), M - 1);
                x[a] = (static_cast<double>(j) + (scaled - static_cast<double>(j))) / static_cast<double>(M);
                cell = cell * M + j;
            }
            double accept = seq.uniform() * hi;
            if (accept <= std::max(0.0, g.values[cell].real())) {
                ens.positions[i] = x;
                break;
            }
        }
    }
    if (require_distinct) {
        auto sorted = ens.positions;
        std::sort(sorted.begin(), sorted.end(), [d](const rvec& a, const rvec& b) {
            for (int ax = 0; ax < d; ++ax) {
                if (a[ax] != b[ax]) return a[ax] < b[ax];
            }
            return false;
        });
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            bool eq = true;
            for (int ax = 0; ax < d; ++ax) eq = eq && (sorted[i][ax] == sorted[i - 1][ax]);
            if (eq) throw singularity_error("sample_initial: coincident initial positions");
        }
    }
    return ens;
}

// One Euler-Maruyama step: X <- wrap(X + b dt + sigma sqrt(dt) xi).
// A singularity in the drift evaluation propagates before any state is
// mutated, so a rejected step leaves the ensemble untouched.
inline void step_em(ParticleEnsemble& ens, const DriftModel& model, double dt, double sigma) {
    // sigma > 0 for singular drifts is a config-level constraint; the
    // integrator itself also serves the deterministic vortex diagnostics.
    if (!(dt > 0)) throw domain_error("step_em: dt > 0 required");
    std::vector<rvec> vel = model.drift_at_particles(ens.positions);
    double root = sigma * std::sqrt(dt);
    for (std::size_t i = 0; i < ens.positions.size(); ++i) {
        for (int a = 0; a < ens.d; ++a) {
            double noise =
                sigma > 0
                    ? root * ens.stream.gaussian_at(ens.step_index,
                                                    static_cast<uint64_t>(i) * 4 + static_cast<uint64_t>(a))
                    : 0.0;
            ens.positions[i][a] = wrap01(ens.positions[i][a] + vel[i][a] * dt + noise);
        }
    }
    ens.t += dt;
    ens.step_index += 1;
}

// rho^N = sqrt(N) (mu^N - mu), c_0 = 0 exactly.
inline SpectralField fluctuation_field(const ParticleEnsemble& ens, const SpectralField& mu) {
    ivec zero{0, 0, 0};
    if (std::abs(mu.at(zero) - cplx(1, 0)) > 1e-12)
        throw domain_error("fluctuation_field: mu must have c_0 = 1");
    SpectralField emp = embed_empirical(ens.positions, mu.dim(), mu.kmax());
    SpectralField out = emp - mu;
    double root = std::sqrt(static_cast<double>(ens.positions.size()));
    out *= root;
    out.at(zero) = cplx(0, 0);
    return out;
}

}  // namespace fluctlab
