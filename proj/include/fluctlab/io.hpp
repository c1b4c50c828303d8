#pragma once

// File formats: SpectralField dumps (JSON and "FLSF1" binary), weak-error
// CSV rows, gnuplot .dat emission, and run manifests carrying the resolved
// configuration plus a content hash. All floating point output uses %.17g
// so reruns are byte-identical.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "experiments.hpp"
#include "spectral.hpp"

namespace fluctlab::io {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// SHA-1 for manifest content hashes (git-style blob hash of the text).

class Sha1 {
  public:
    static std::string hex(const std::string& data) {
        uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        std::string msg = data;
        uint64_t bits = static_cast<uint64_t>(msg.size()) * 8;
        msg.push_back(static_cast<char>(0x80));
        while (msg.size() % 64 != 56) msg.push_back('\0');
        for (int i = 7; i >= 0; --i) msg.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
        for (std::size_t off = 0; off < msg.size(); off += 64) {
            uint32_t w[80];
            for (int i = 0; i < 16; ++i)
                w[i] = (static_cast<uint32_t>(static_cast<unsigned char>(msg[off + 4 * i])) << 24) |
                       (static_cast<uint32_t>(static_cast<unsigned char>(msg[off + 4 * i + 1])) << 16) |
                       (static_cast<uint32_t>(static_cast<unsigned char>(msg[off + 4 * i + 2])) << 8) |
                       static_cast<uint32_t>(static_cast<unsigned char>(msg[off + 4 * i + 3]));
            for (int i = 16; i < 80; ++i) w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
            uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
            for (int i = 0; i < 80; ++i) {
                uint32_t f, k;
                if (i < 20) {
                    f = (b & c) | ((~b) & d);
                    k = 0x5A827999u;
                } else if (i < 40) {
                    f = b ^ c ^ d;
                    k = 0x6ED9EBA1u;
                } else if (i < 60) {
                    f = (b & c) | (b & d) | (c & d);
                    k = 0x8F1BBCDCu;
                } else {
                    f = b ^ c ^ d;
                    k = 0xCA62C1D6u;
                }
                uint32_t t = rotl(a, 5) + f + e + k + w[i];
                e = d;
                d = c;
                c = rotl(b, 30);
                b = a;
                a = t;
            }
            h[0] += a;
            h[1] += b;
            h[2] += c;
            h[3] += d;
            h[4] += e;
        }
        std::ostringstream out;
        for (uint32_t v : h) {
            char buf[9];
            std::snprintf(buf, sizeof(buf), "%08x", v);
            out << buf;
        }
        return out.str();
    }

  private:
    static uint32_t rotl(uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }
};

// ---------------------------------------------------------------------------
// Field dumps

inline nlohmann::json field_to_json(const SpectralField& f) {
    nlohmann::json j;
    j["d"] = f.dim();
    j["kmax"] = f.kmax();
    auto coeffs = nlohmann::json::array();
    for (std::size_t i = 0; i < f.size(); ++i)
        coeffs.push_back({f[i].real(), f[i].imag()});
    j["coeffs"] = coeffs;
    return j;
}

inline SpectralField field_from_json(const nlohmann::json& j) {
    SpectralField f(j.at("d").get<int>(), j.at("kmax").get<int>());
    const auto& coeffs = j.at("coeffs");
    if (coeffs.size() != f.size()) throw shape_error("field_from_json: coefficient count mismatch");
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = cplx(coeffs[i][0].get<double>(), coeffs[i][1].get<double>());
    return f;
}

inline void write_field_json(const SpectralField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw domain_error("cannot open " + path + " for writing");
    out << field_to_json(f).dump(2) << "\n";
}

inline SpectralField read_field_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return field_from_json(j);
}

// Binary dump: magic "FLSF1", uint32 d, uint32 kmax, then little-endian f64
// (re, im) pairs in row-major lattice order.
inline void write_field_binary(const SpectralField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw domain_error("cannot open " + path + " for writing");
    out.write("FLSF1", 5);
    uint32_t d = static_cast<uint32_t>(f.dim()), km = static_cast<uint32_t>(f.kmax());
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(&km), 4);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double re = f[i].real(), im = f[i].imag();
        out.write(reinterpret_cast<const char*>(&re), 8);
        out.write(reinterpret_cast<const char*>(&im), 8);
    }
}

inline SpectralField read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw domain_error("cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (std::string(magic, 5) != "FLSF1") throw domain_error("bad magic in " + path);
    uint32_t d = 0, km = 0;
    in.read(reinterpret_cast<char*>(&d), 4);
    in.read(reinterpret_cast<char*>(&km), 4);
    SpectralField f(static_cast<int>(d), static_cast<int>(km));
    for (std::size_t i = 0; i < f.size(); ++i) {
        double re, im;
        in.read(reinterpret_cast<char*>(&re), 8);
        in.read(reinterpret_cast<char*>(&im), 8);
        f[i] = cplx(re, im);
    }
    if (!in) throw domain_error("truncated field dump " + path);
    return f;
}

// ---------------------------------------------------------------------------
// CSV / dat emission

inline std::string weak_error_csv(const std::vector<WeakErrorRow>& rows) {
    std::ostringstream out;
    out << "N,est_p,se_p,est_s,se_s,gap,gap_se,replicas\n";
    for (const auto& r : rows) {
        out << r.N << ',' << fmt_double(r.est_particle) << ',' << fmt_double(r.se_particle) << ','
            << fmt_double(r.est_spde) << ',' << fmt_double(r.se_spde) << ',' << fmt_double(r.gap)
            << ',' << fmt_double(r.gap_se) << ',' << r.replicas << '\n';
    }
    return out.str();
}

inline std::string weak_error_dat(const std::vector<WeakErrorRow>& rows) {
    std::ostringstream out;
    out << "# N  |gap|  gap_se\n";
    for (const auto& r : rows)
        out << r.N << "  " << fmt_double(std::abs(r.gap)) << "  " << fmt_double(r.gap_se) << "\n";
    return out.str();
}

inline std::string clt_csv(const std::vector<CltRow>& rows) {
    std::ostringstream out;
    out << "N,var_p,se_p,var_s,se_s,target,z_p,z_s\n";
    for (const auto& r : rows) {
        out << r.N << ',' << fmt_double(r.var_particle) << ',' << fmt_double(r.se_particle) << ','
            << fmt_double(r.var_spde) << ',' << fmt_double(r.se_spde) << ',' << fmt_double(r.target)
            << ',' << fmt_double(r.z_particle) << ',' << fmt_double(r.z_spde) << '\n';
    }
    return out.str();
}

inline std::string energy_csv(const std::vector<EnergyRow>& rows) {
    std::ostringstream out;
    out << "N,mean,se,mean_abs,se_abs,replicas\n";
    for (const auto& r : rows) {
        out << r.N << ',' << fmt_double(r.mean) << ',' << fmt_double(r.se) << ','
            << fmt_double(r.mean_abs) << ',' << fmt_double(r.se_abs) << ',' << r.replicas << '\n';
    }
    return out.str();
}

inline std::string refinement_csv(const std::vector<RefinementLevel>& rows) {
    std::ostringstream out;
    out << "kmax,L,n,dt,estimate,se,diff_prev,stall\n";
    for (const auto& r : rows) {
        out << r.kmax << ',' << r.L << ',' << r.n << ',' << fmt_double(r.dt) << ','
            << fmt_double(r.estimate) << ',' << fmt_double(r.se) << ',' << fmt_double(r.diff_prev)
            << ',' << (r.stall ? 1 : 0) << '\n';
    }
    return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw domain_error("cannot open " + path + " for writing");
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw domain_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fluctlab::io
