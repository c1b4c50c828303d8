#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is addressed by
// (key, counter), so replicas, steps and particles can be sampled in any
// order or thread schedule without changing the stream.

#include <array>
#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace fluctlab::rng {

namespace detail {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 2> key,
                                          std::array<uint32_t, 4> ctr) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, ctr[0], hi0, lo0);
        mulhilo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Stream identifiers; a stream is a 64-bit key mixed from the master seed
// and a list of id words (domain tag, replica, ...).
struct Stream {
    std::array<uint32_t, 2> key{0, 0};

    Stream() = default;
    Stream(uint64_t master_seed, std::initializer_list<uint64_t> ids) {
        uint64_t acc = master_seed;
        uint64_t h = detail::splitmix64(acc);
        for (uint64_t id : ids) {
            acc ^= id + 0x632BE59BD9B4E019ull + (acc << 6) + (acc >> 2);
            h ^= detail::splitmix64(acc);
        }
        key = {static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
    }

    // Raw 128-bit block addressed by a 128-bit counter.
    std::array<uint32_t, 4> block(uint64_t hi, uint64_t lo) const {
        return detail::philox4x32(key, {static_cast<uint32_t>(lo), static_cast<uint32_t>(lo >> 32),
                                        static_cast<uint32_t>(hi), static_cast<uint32_t>(hi >> 32)});
    }

    // Two uniforms in [0,1) from one block.
    std::array<double, 2> uniform2(uint64_t hi, uint64_t lo) const {
        auto b = block(hi, lo);
        uint64_t u0 = (static_cast<uint64_t>(b[0]) << 32) | b[1];
        uint64_t u1 = (static_cast<uint64_t>(b[2]) << 32) | b[3];
        constexpr double scale = 0x1.0p-53;
        return {static_cast<double>(u0 >> 11) * scale, static_cast<double>(u1 >> 11) * scale};
    }

    // Two independent standard normals (Box-Muller) from one block.
    std::array<double, 2> gaussian2(uint64_t hi, uint64_t lo) const {
        auto u = uniform2(hi, lo);
        double r = std::sqrt(-2.0 * std::log1p(-u[0]));  // 1-u in (0,1]
        double a = two_pi * u[1];
        return {r * std::cos(a), r * std::sin(a)};
    }

    // idx-th standard normal within counter-page hi.
    double gaussian_at(uint64_t hi, uint64_t idx) const {
        auto g = gaussian2(hi, idx >> 1);
        return g[idx & 1];
    }

    double uniform_at(uint64_t hi, uint64_t idx) const {
        auto u = uniform2(hi, idx >> 1);
        return u[idx & 1];
    }
};

// Sequential convenience view over one counter page of a stream.
class Sequence {
  public:
    Sequence(const Stream& s, uint64_t page) : s_(s), page_(page) {}
    double gaussian() { return s_.gaussian_at(page_, n_++); }
    double uniform() { return s_.uniform_at(page_, n_++); }

  private:
    const Stream& s_;
    uint64_t page_;
    uint64_t n_ = 0;
};

// Domain tags keeping module streams disjoint.
enum : uint64_t {
    tag_particles = 1,
    tag_spde = 2,
    tag_init = 3,
    tag_bootstrap = 4,
    tag_test = 99,
};

}  // namespace fluctlab::rng
