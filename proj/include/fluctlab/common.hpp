#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluctlab {

using cplx = std::complex<double>;

// Error taxonomy. Validation problems exit with code 2, numerical problems
// with code 3 (see cli.hpp for the mapping).
struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct index_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct singularity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct instability_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct positivity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct insufficient_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct internal_consistency_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lattice index, up to three axes used.
using ivec = std::array<int, 3>;
using rvec = std::array<double, 3>;
using cvec = std::array<cplx, 3>;

inline double dot(const rvec& a, const rvec& b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const rvec& a, int d) { return dot(a, a, d); }

inline int inorm2(const ivec& k, int d) {
    int s = 0;
    for (int i = 0; i < d; ++i) s += k[i] * k[i];
    return s;
}

// Japanese bracket squared, <k>^2 = 1 + |k|^2.
inline double bracket2(const ivec& k, int d) { return 1.0 + inorm2(k, d); }

inline std::string ivec_str(const ivec& k, int d) {
    std::string s = "(";
    for (int i = 0; i < d; ++i) s += std::to_string(k[i]) + (i + 1 < d ? "," : "");
    return s + ")";
}

constexpr double two_pi = 6.283185307179586476925286766559;

}  // namespace fluctlab
