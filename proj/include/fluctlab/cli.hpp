#pragma once

// Configuration parsing, validation, subcommand dispatch, and run manifests.
//
// Config files are sectioned key = value text; --set section.key=value
// overrides individual entries. Validation is aggregated: every violated
// constraint is reported, not just the first, and unknown keys name their
// nearest valid key. Exit codes: 0 success, 2 validation/insufficient data,
// 3 numerical error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "experiments.hpp"
#include "functionals.hpp"
#include "io.hpp"

namespace fluctlab::cli {

// ---------------------------------------------------------------------------
// key registry

struct KeySpec {
    std::string key;  // "section.name"
    std::string def;  // default value, empty = required? (all keys have defaults here)
};

inline const std::vector<KeySpec>& key_registry() {
    static const std::vector<KeySpec> reg = {
        {"domain.d", "1"},
        {"domain.kmax", "16"},
        {"domain.lambda", "2.0"},
        {"domain.lambda_prime", "3.5"},
        {"dynamics.sigma", "1.0"},
        {"dynamics.t_final", "0.25"},
        {"dynamics.dt", ""},  // defaults to t_final/2000
        {"drift.variant", "smooth"},
        {"drift.preset", "sine1d"},
        {"drift.alpha", "1.0"},
        {"drift.sigma_conv", "0.15"},
        {"drift.table", ""},  // inline multiplier table for variant=smooth, preset=inline
        {"drift.image_radius", ""},
        {"drift.normalization", "mean_field"},
        {"drift.capped", "false"},
        {"drift.eps_cap", "0.001"},
        {"spde.L_noise", ""},  // defaults to kmax
        {"spde.n_mollify", "0"},
        {"spde.rho0", "gaussian"},
        {"init.mu0", "uniform"},
        {"init.mu0_amp", "0.5"},
        {"init.mu0_mode", "1"},
        {"init.mu0_axis", "0"},
        {"functional.outer", "tanh_product"},
        {"functional.phis", "1:16; 2:250"},
        {"functional.scales", "0.9, 0.8"},
        {"functional.offsets", "0.2, -0.1"},
        {"functional.amp", "1.0"},
        {"functional.width", "1.0"},
        {"functional.cutoff", "4.0"},
        {"functional.s", "auto"},
        {"experiment.N_list", "64,128,256,512,1024,2048"},
        {"experiment.replicas_particle", "10000"},
        {"experiment.replicas_spde", "10000"},
        {"experiment.replicas", "2000"},
        {"experiment.n_outputs", "5"},
        {"experiment.ladder", "8/8/0/0.0005; 16/16/0/0.0005; 32/32/0/0.0005"},
        {"run.master_seed", "1"},
        {"run.threads", "0"},  // 0 = FLUCTLAB_THREADS or 1
        {"run.out_dir", "out"},
        {"run.trajectories", "false"},
        {"run.emit_dat", "false"},
    };
    return reg;
}

inline int edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                                 dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return dp[a.size()][b.size()];
}

inline std::string nearest_key(const std::string& key) {
    int best = 1 << 30;
    std::string arg;
    for (const auto& ks : key_registry()) {
        int d = edit_distance(key, ks.key);
        if (d < best) {
            best = d;
            arg = ks.key;
        }
    }
    return arg;
}

// ---------------------------------------------------------------------------
// raw parsing

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                            std::vector<std::string>& errors) {
    std::map<std::string, std::string> kv;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = line;
        std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                errors.push_back("line " + std::to_string(lineno) + ": malformed section header");
                continue;
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (section.empty()) {
            errors.push_back("line " + std::to_string(lineno) + ": key '" + key +
                             "' outside any [section]");
            continue;
        }
        kv[section + "." + key] = val;
    }
    return kv;
}

// ---------------------------------------------------------------------------
// resolved configuration

struct RunConfig {
    McSetup setup;
    // functional
    OuterMap::Kind outer_kind = OuterMap::Kind::TanhProduct;
    std::vector<std::pair<ivec, double>> phi_modes;  // cosine mode and amplitude per phi
    std::vector<double> scales, offsets;
    double amp = 1.0, width = 1.0, cutoff = 4.0;
    // experiment
    std::vector<std::size_t> N_list;
    int replicas_particle = 10000, replicas_spde = 10000, replicas = 2000;
    int n_outputs = 5;
    std::vector<std::array<double, 4>> ladder;
    // run
    std::string out_dir = "out";
    bool trajectories = false, emit_dat = false;
    std::string drift_name = "smooth";
    std::map<std::string, std::string> resolved;

    CylindricalFunctional make_functional(int kmax) const {
        std::vector<SpectralField> phis;
        for (const auto& [mode, a] : phi_modes) {
            SpectralField f(setup.d, kmax);
            ivec mk{-mode[0], -mode[1], -mode[2]};
            if (!f.in_lattice(mode))
                throw domain_error("functional mode " + ivec_str(mode, setup.d) + " outside lattice");
            f.at(mode) = a / 2.0;
            f.at(mk) += a / 2.0;
            phis.push_back(f);
        }
        OuterMap g;
        switch (outer_kind) {
            case OuterMap::Kind::Linear:
                g = OuterMap::linear(scales);
                break;
            case OuterMap::Kind::Quadratic: {
                int m = static_cast<int>(phi_modes.size());
                std::vector<double> Q(static_cast<std::size_t>(m * m), 0.0);
                for (int i = 0; i < m; ++i) Q[static_cast<std::size_t>(i * m + i)] = 1.0;
                g = OuterMap::quadratic(Q, scales, cutoff);
                break;
            }
            case OuterMap::Kind::TanhProduct:
                g = OuterMap::tanh_product(scales, offsets, amp);
                break;
            case OuterMap::Kind::GaussBump:
                g = OuterMap::gauss_bump(offsets, width, amp);
                break;
        }
        return CylindricalFunctional(g, phis, setup.idx);
    }
};

inline double to_double(const std::string& v, const std::string& key,
                        std::vector<std::string>& errors) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (...) {
        errors.push_back("key '" + key + "': cannot parse '" + v + "' as a number");
        return 0;
    }
}

inline long to_int(const std::string& v, const std::string& key, std::vector<std::string>& errors) {
    try {
        std::size_t pos = 0;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (...) {
        errors.push_back("key '" + key + "': cannot parse '" + v + "' as an integer");
        return 0;
    }
}

inline bool to_bool(const std::string& v, const std::string& key, std::vector<std::string>& errors) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    errors.push_back("key '" + key + "': cannot parse '" + v + "' as a boolean");
    return false;
}

inline ivec parse_mode(const std::string& s, int d, std::vector<std::string>& errors) {
    ivec k{0, 0, 0};
    auto parts = split(s, '/');
    if (static_cast<int>(parts.size()) > d)
        errors.push_back("mode '" + s + "' has more components than d");
    for (std::size_t a = 0; a < parts.size() && a < 3; ++a)
        k[a] = static_cast<int>(to_int(parts[a], "mode", errors));
    return k;
}

// Build a fully validated RunConfig or throw a validation_error listing
// every violated constraint.
inline RunConfig resolve_config(std::map<std::string, std::string> kv) {
    std::vector<std::string> errors;

    // unknown keys first, with suggestions
    for (const auto& [key, val] : kv) {
        bool known = false;
        for (const auto& ks : key_registry()) known = known || ks.key == key;
        if (!known)
            errors.push_back("unknown key '" + key + "' (did you mean '" + nearest_key(key) + "'?)");
    }
    // defaults
    for (const auto& ks : key_registry())
        if (!kv.count(ks.key)) kv[ks.key] = ks.def;

    RunConfig cfg;
    auto get = [&](const std::string& k) { return kv[k]; };

    int d = static_cast<int>(to_int(get("domain.d"), "domain.d", errors));
    int kmax = static_cast<int>(to_int(get("domain.kmax"), "domain.kmax", errors));
    double lambda = to_double(get("domain.lambda"), "domain.lambda", errors);
    double lambda_prime = to_double(get("domain.lambda_prime"), "domain.lambda_prime", errors);
    double sigma = to_double(get("dynamics.sigma"), "dynamics.sigma", errors);
    double t_final = to_double(get("dynamics.t_final"), "dynamics.t_final", errors);
    double dt = get("dynamics.dt").empty() ? t_final / 2000.0
                                           : to_double(get("dynamics.dt"), "dynamics.dt", errors);

    if (d < 1 || d > 3) errors.push_back("domain.d must be 1, 2 or 3");
    if (kmax < 2) errors.push_back("domain.kmax >= 2 required");
    if (d >= 1 && d <= 3 && !(lambda > 1.5 * d))
        errors.push_back("domain.lambda violates lambda > 1.5*d (lambda=" + get("domain.lambda") +
                         ", d=" + std::to_string(d) + ")");
    if (!(lambda_prime > lambda + 1.0))
        errors.push_back("domain.lambda_prime violates lambda_prime > lambda + 1");
    if (!(dt > 0)) errors.push_back("dynamics.dt > 0 required");
    if (!(t_final >= dt)) errors.push_back("dynamics.t_final >= dt required");

    // drift
    std::string variant = get("drift.variant");
    DriftModel model;
    cfg.drift_name = variant;
    if (variant == "smooth") {
        std::string preset = get("drift.preset");
        double alpha = to_double(get("drift.alpha"), "drift.alpha", errors);
        if (preset == "sine1d") {
            if (d != 1) errors.push_back("drift preset sine1d requires d = 1");
            model = DriftModel::sine1d(alpha);
        } else if (preset == "gauss_reg") {
            if (kmax >= 2 && d >= 1 && d <= 3)
                model = DriftModel::gauss_reg(d, kmax,
                                              to_double(get("drift.sigma_conv"), "drift.sigma_conv", errors));
        } else if (preset == "zero") {
            model = DriftModel::smooth(d, {});
        } else if (preset == "inline") {
            // table entries "k ; re,im re,im ..." separated by '|'
            std::vector<std::pair<ivec, cvec>> tab;
            for (const auto& entry : split(get("drift.table"), '|')) {
                if (entry.empty()) continue;
                auto halves = split(entry, ';');
                if (halves.size() != 2) {
                    errors.push_back("drift.table entry '" + entry + "' must be 'mode ; pairs'");
                    continue;
                }
                ivec k = parse_mode(halves[0], d, errors);
                cvec v{};
                auto comps = split(halves[1], ' ');
                for (int a = 0; a < d && a < static_cast<int>(comps.size()); ++a) {
                    auto pair = split(comps[static_cast<std::size_t>(a)], ',');
                    if (pair.size() == 2)
                        v[a] = cplx(to_double(pair[0], "drift.table", errors),
                                    to_double(pair[1], "drift.table", errors));
                }
                tab.push_back({k, v});
            }
            try {
                model = DriftModel::smooth(d, tab);
            } catch (const std::exception& e) {
                errors.push_back(std::string("drift.table: ") + e.what());
            }
        } else {
            errors.push_back("drift.preset must be sine1d | gauss_reg | zero | inline");
        }
        cfg.drift_name = "smooth:" + preset;
    } else if (variant == "biot_savart") {
        if (d != 2)
            errors.push_back("drift.variant biot_savart rejected (kernel is d=2 only), got d=" +
                             std::to_string(d));
        model = DriftModel::biot_savart();
        if (!(sigma > 0)) errors.push_back("dynamics.sigma > 0 required for singular drifts");
    } else if (variant == "coulomb") {
        if (d != 2 && d != 3)
            errors.push_back("drift.variant coulomb requires d = 2 or 3");
        else
            model = DriftModel::coulomb(d);
        if (!(sigma > 0)) errors.push_back("dynamics.sigma > 0 required for singular drifts");
    } else {
        errors.push_back("drift.variant must be smooth | biot_savart | coulomb");
    }
    if (!get("drift.image_radius").empty())
        model.image_radius = static_cast<int>(to_int(get("drift.image_radius"), "drift.image_radius", errors));
    std::string norm = get("drift.normalization");
    if (norm == "mean_field")
        model.normalization = DriftModel::Normalization::MeanField;
    else if (norm == "unscaled")
        model.normalization = DriftModel::Normalization::Unscaled;
    else
        errors.push_back("drift.normalization must be mean_field | unscaled");
    model.capped = to_bool(get("drift.capped"), "drift.capped", errors);
    model.eps_cap = to_double(get("drift.eps_cap"), "drift.eps_cap", errors);

    // spde
    int L = get("spde.L_noise").empty() ? kmax
                                        : static_cast<int>(to_int(get("spde.L_noise"), "spde.L_noise", errors));
    int n_mollify = static_cast<int>(to_int(get("spde.n_mollify"), "spde.n_mollify", errors));
    if (L < 1) errors.push_back("spde.L_noise >= 1 required");
    if (n_mollify < 0) errors.push_back("spde.n_mollify >= 0 required");
    std::string rho0 = get("spde.rho0");
    if (rho0 != "gaussian" && rho0 != "zero")
        errors.push_back("spde.rho0 must be gaussian | zero");

    // init
    SpectralField mu0(std::min(std::max(d, 1), 3), std::max(kmax, 2));
    mu0.at({0, 0, 0}) = 1.0;
    std::string mu0kind = get("init.mu0");
    if (mu0kind == "cosine") {
        double ampl = to_double(get("init.mu0_amp"), "init.mu0_amp", errors);
        int axis = static_cast<int>(to_int(get("init.mu0_axis"), "init.mu0_axis", errors));
        int q = static_cast<int>(to_int(get("init.mu0_mode"), "init.mu0_mode", errors));
        if (axis < 0 || axis >= d) {
            errors.push_back("init.mu0_axis outside 0..d-1");
        } else if (std::abs(ampl) >= 1.0) {
            errors.push_back("init.mu0_amp must satisfy |amp| < 1 for positivity");
        } else if (q < 1 || q > kmax) {
            errors.push_back("init.mu0_mode outside 1..kmax");
        } else {
            ivec k{0, 0, 0}, mk{0, 0, 0};
            k[axis] = q;
            mk[axis] = -q;
            mu0.at(k) = ampl / 2.0;
            mu0.at(mk) = ampl / 2.0;
        }
    } else if (mu0kind != "uniform") {
        errors.push_back("init.mu0 must be uniform | cosine");
    }

    // functional
    std::string outer = get("functional.outer");
    if (outer == "linear")
        cfg.outer_kind = OuterMap::Kind::Linear;
    else if (outer == "quadratic")
        cfg.outer_kind = OuterMap::Kind::Quadratic;
    else if (outer == "tanh_product")
        cfg.outer_kind = OuterMap::Kind::TanhProduct;
    else if (outer == "gauss_bump")
        cfg.outer_kind = OuterMap::Kind::GaussBump;
    else
        errors.push_back("functional.outer must be linear | quadratic | tanh_product | gauss_bump");
    for (const auto& entry : split(get("functional.phis"), ';')) {
        if (entry.empty()) continue;
        auto parts = split(entry, ':');
        if (parts.size() != 2) {
            errors.push_back("functional.phis entry '" + entry + "' must be 'mode:amp'");
            continue;
        }
        ivec k = parse_mode(parts[0], d, errors);
        cfg.phi_modes.push_back({k, to_double(parts[1], "functional.phis", errors)});
    }
    for (const auto& v : split(get("functional.scales"), ','))
        if (!v.empty()) cfg.scales.push_back(to_double(v, "functional.scales", errors));
    for (const auto& v : split(get("functional.offsets"), ','))
        if (!v.empty()) cfg.offsets.push_back(to_double(v, "functional.offsets", errors));
    cfg.amp = to_double(get("functional.amp"), "functional.amp", errors);
    cfg.width = to_double(get("functional.width"), "functional.width", errors);
    cfg.cutoff = to_double(get("functional.cutoff"), "functional.cutoff", errors);
    if (cfg.phi_modes.empty()) errors.push_back("functional.phis must name at least one test function");
    if (cfg.scales.size() != cfg.phi_modes.size())
        errors.push_back("functional.scales must have one entry per phi");
    if (cfg.outer_kind == OuterMap::Kind::TanhProduct && cfg.offsets.size() != cfg.phi_modes.size())
        errors.push_back("functional.offsets must have one entry per phi for tanh_product");
    if (cfg.outer_kind == OuterMap::Kind::GaussBump && cfg.offsets.size() != cfg.phi_modes.size())
        errors.push_back("functional.offsets (bump center) must have one entry per phi");
    std::string sspec = get("functional.s");
    if (sspec != "auto") errors.push_back("functional.s supports only 'auto' (= -lambda-2)");

    // experiment
    for (const auto& v : split(get("experiment.N_list"), ',')) {
        if (v.empty()) continue;
        long n = to_int(v, "experiment.N_list", errors);
        if (n < 1)
            errors.push_back("experiment.N_list entries must be >= 1");
        else
            cfg.N_list.push_back(static_cast<std::size_t>(n));
    }
    if (cfg.N_list.empty()) errors.push_back("experiment.N_list must not be empty");
    cfg.replicas_particle =
        static_cast<int>(to_int(get("experiment.replicas_particle"), "experiment.replicas_particle", errors));
    cfg.replicas_spde =
        static_cast<int>(to_int(get("experiment.replicas_spde"), "experiment.replicas_spde", errors));
    cfg.replicas = static_cast<int>(to_int(get("experiment.replicas"), "experiment.replicas", errors));
    cfg.n_outputs = static_cast<int>(to_int(get("experiment.n_outputs"), "experiment.n_outputs", errors));
    if (cfg.replicas_particle < 1 || cfg.replicas_spde < 1 || cfg.replicas < 1)
        errors.push_back("replica counts must be >= 1");
    if (cfg.n_outputs < 1) errors.push_back("experiment.n_outputs >= 1 required");
    for (const auto& lv : split(get("experiment.ladder"), ';')) {
        if (lv.empty()) continue;
        auto parts = split(lv, '/');
        if (parts.size() != 4) {
            errors.push_back("experiment.ladder level '" + lv + "' must be kmax/L/n/dt");
            continue;
        }
        cfg.ladder.push_back({to_double(parts[0], "ladder", errors), to_double(parts[1], "ladder", errors),
                              to_double(parts[2], "ladder", errors), to_double(parts[3], "ladder", errors)});
    }

    // run
    uint64_t seed = static_cast<uint64_t>(to_int(get("run.master_seed"), "run.master_seed", errors));
    int threads = static_cast<int>(to_int(get("run.threads"), "run.threads", errors));
    if (threads == 0) {
        const char* env = std::getenv("FLUCTLAB_THREADS");
        threads = env ? std::atoi(env) : 1;
        if (threads < 1) threads = 1;
    }
    cfg.out_dir = get("run.out_dir");
    cfg.trajectories = to_bool(get("run.trajectories"), "run.trajectories", errors);
    cfg.emit_dat = to_bool(get("run.emit_dat"), "run.emit_dat", errors);

    if (!errors.empty()) {
        std::string msg = "configuration invalid (" + std::to_string(errors.size()) + " problems):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw validation_error(msg);
    }

    cfg.setup.d = d;
    cfg.setup.kmax = kmax;
    cfg.setup.idx = SobolevIndices(d, lambda, lambda_prime);
    cfg.setup.model = model;
    cfg.setup.sigma = sigma;
    cfg.setup.t_final = t_final;
    cfg.setup.dt = dt;
    cfg.setup.L_noise = L;
    cfg.setup.n_mollify = n_mollify;
    cfg.setup.rho0_gaussian = (rho0 == "gaussian");
    cfg.setup.mu0 = mu0;
    cfg.setup.seed = seed;
    cfg.setup.threads = threads;
    // record resolved values where the raw config left them implicit
    if (kv["dynamics.dt"].empty()) kv["dynamics.dt"] = io::fmt_double(dt);
    if (kv["spde.L_noise"].empty()) kv["spde.L_noise"] = std::to_string(L);
    kv["run.threads"] = std::to_string(threads);
    cfg.resolved = kv;
    return cfg;
}

inline RunConfig parse_config(const std::string& path,
                              const std::vector<std::string>& overrides = {}) {
    std::vector<std::string> errors;
    std::map<std::string, std::string> kv;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw validation_error("config file not found: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        kv = parse_config_text(ss.str(), errors);
    }
    for (const auto& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos) {
            errors.push_back("--set '" + ov + "' must be section.key=value");
            continue;
        }
        kv[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }
    if (!errors.empty()) {
        std::string msg = "configuration syntax invalid:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw validation_error(msg);
    }
    return resolve_config(std::move(kv));
}

// ---------------------------------------------------------------------------
// manifests

inline nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command,
                                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    nlohmann::json conf;
    std::string canon;
    for (const auto& [k, v] : cfg.resolved) {
        conf[k] = v;
        canon += k + " = " + v + "\n";
    }
    j["config"] = conf;
    j["content_hash"] = io::Sha1::hex(canon);
    j["master_seed"] = cfg.setup.seed;
    j["spde"] = {{"kmax", cfg.setup.kmax},       {"L", cfg.setup.L_noise},
                 {"n", cfg.setup.n_mollify},     {"dt", cfg.setup.dt},
                 {"sigma", cfg.setup.sigma},     {"drift", cfg.drift_name},
                 {"mu_curve_ref", "fp_curve"},   {"seed", cfg.setup.seed}};
    j["outputs"] = outputs;
    return j;
}

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::vector<std::string>& outputs,
                           const nlohmann::json& extra = {}) {
    nlohmann::json j = make_manifest(cfg, command, outputs);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// subcommands

inline int run_solve_fp(const RunConfig& cfg) {
    FokkerPlanck fp(cfg.setup.model, cfg.setup.sigma, cfg.setup.d, cfg.setup.kmax);
    std::vector<double> tg;
    for (int i = 0; i <= cfg.n_outputs; ++i)
        tg.push_back(cfg.setup.t_final * static_cast<double>(i) / cfg.n_outputs);
    MuCurve curve = fp.solve(cfg.setup.mu0, tg, cfg.setup.dt);
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::string> outputs;
    nlohmann::json index;
    index["times"] = curve.stationary ? std::vector<double>{0.0} : tg;
    index["sigma"] = cfg.setup.sigma;
    index["model"] = cfg.drift_name;
    for (std::size_t i = 0; i < curve.mus.size(); ++i) {
        std::string name = "mu_" + std::to_string(i) + ".json";
        io::write_field_json(curve.mus[i], cfg.out_dir + "/" + name);
        outputs.push_back(name);
    }
    io::write_text(cfg.out_dir + "/curve_index.json", index.dump(2) + "\n");
    outputs.push_back("curve_index.json");
    write_manifest(cfg, "solve-fp", outputs);
    std::cout << "solve-fp: wrote " << curve.mus.size() << " field dumps to " << cfg.out_dir << "\n";
    return 0;
}

inline int run_simulate_particles(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    MuCurve curve = detail::build_curve(s);
    std::size_t N = cfg.N_list.front();
    std::size_t steps = detail::step_count(s.t_final, s.dt);
    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream traj;
    traj << "t,replica,particle";
    for (int a = 0; a < s.d; ++a) traj << ",x" << (a + 1);
    traj << "\n";
    std::ostringstream summary;
    summary << "replica,fluct_norm\n";
    for (int r = 0; r < cfg.replicas; ++r) {
        auto ens = sample_initial(s.mu0, N, s.seed, static_cast<uint64_t>(r), s.model.singular());
        ens.stream = rng::Stream(s.seed, {rng::tag_particles, static_cast<uint64_t>(r)});
        auto emit = [&]() {
            for (std::size_t i = 0; i < ens.positions.size(); ++i) {
                traj << io::fmt_double(ens.t) << ',' << r << ',' << i;
                for (int a = 0; a < s.d; ++a) traj << ',' << io::fmt_double(ens.positions[i][a]);
                traj << "\n";
            }
        };
        if (cfg.trajectories) emit();
        for (std::size_t q = 0; q < steps; ++q) {
            step_em(ens, s.model, s.dt, s.sigma);
            if (cfg.trajectories) emit();
        }
        if (!cfg.trajectories) emit();
        SpectralField rho = fluctuation_field(ens, curve.mu_at(s.t_final));
        summary << r << ',' << io::fmt_double(sobolev_norm(rho, s.idx.s_fluct())) << "\n";
    }
    io::write_text(cfg.out_dir + "/trajectories.csv", traj.str());
    io::write_text(cfg.out_dir + "/particle_summary.csv", summary.str());
    write_manifest(cfg, "simulate-particles", {"trajectories.csv", "particle_summary.csv"});
    std::cout << "simulate-particles: " << cfg.replicas << " replicas of N=" << N << " done\n";
    return 0;
}

inline int run_simulate_spde(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    MuCurve curve = detail::build_curve(s);
    SpdeEngine eng(s.model, s.d, s.kmax, s.sigma);
    CylindricalFunctional Phi = cfg.make_functional(s.kmax);
    std::vector<double> vals(static_cast<std::size_t>(cfg.replicas_spde), 0.0);
    parallel_for(vals.size(), s.threads, [&](std::size_t r) {
        vals[r] = spde_replica_phi(s, Phi, eng, curve, static_cast<uint64_t>(r));
    });
    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream csv;
    csv << "replica,phi\n";
    for (std::size_t r = 0; r < vals.size(); ++r)
        csv << r << ',' << io::fmt_double(vals[r]) << "\n";
    io::write_text(cfg.out_dir + "/spde_phi.csv", csv.str());
    // one representative terminal state snapshot
    GalerkinState st;
    st.indices = s.idx;
    st.n_mollify = s.n_mollify;
    st.L_noise = s.L_noise;
    st.rho = s.rho0_gaussian
                 ? eng.sample_rho0(s.mu0, rng::Stream(s.seed, {rng::tag_spde, 0, 1}), 0)
                 : SpectralField(s.d, s.kmax);
    rng::Stream stream(s.seed, {rng::tag_spde, 0, 2});
    NoiseModel nm{s.sigma, s.L_noise};
    std::size_t steps = detail::step_count(s.t_final, s.dt);
    for (std::size_t q = 0; q < steps; ++q) eng.step(st, s.dt, curve, nm, stream);
    io::write_field_json(st.rho, cfg.out_dir + "/rho_final_replica0.json");
    MeanSe ms = mean_se(vals);
    nlohmann::json extra;
    extra["phi_mean"] = ms.mean;
    extra["phi_se"] = ms.se;
    write_manifest(cfg, "simulate-spde", {"spde_phi.csv", "rho_final_replica0.json"}, extra);
    std::cout << "simulate-spde: E[Phi] = " << ms.mean << " +- " << ms.se << "\n";
    return 0;
}

inline int run_weak_error(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    CylindricalFunctional Phi = cfg.make_functional(s.kmax);
    WeakErrorResult res =
        weak_error_curve(s, Phi, cfg.N_list, cfg.replicas_particle, cfg.replicas_spde);
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/weak_error.csv", io::weak_error_csv(res.rows));
    std::vector<std::string> outputs = {"weak_error.csv"};
    if (cfg.emit_dat) {
        io::write_text(cfg.out_dir + "/weak_error.dat", io::weak_error_dat(res.rows));
        outputs.push_back("weak_error.dat");
    }
    RateFit fit = fit_rate(res, s.seed);  // throws insufficient_data_error if < 3 usable rows
    nlohmann::json extra;
    extra["fit"] = {{"slope", fit.slope},   {"intercept", fit.intercept}, {"r2", fit.r2},
                    {"ci_lo", fit.ci_lo},   {"ci_hi", fit.ci_hi},         {"usable_rows", fit.usable_rows}};
    extra["spde_pool_shared_across_N"] = true;
    write_manifest(cfg, "weak-error", outputs, extra);
    std::cout << "weak-error: slope " << fit.slope << "  CI [" << fit.ci_lo << ", " << fit.ci_hi
              << "]  r2 " << fit.r2 << "\n";
    for (const auto& r : res.rows)
        std::cout << "  N=" << r.N << "  gap " << r.gap << " +- " << r.gap_se
                  << (r.usable ? "" : "  [flagged: below 2 se]") << "\n";
    return 0;
}

inline int run_clt_baseline(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    // phi = first configured test function
    CylindricalFunctional Phi = cfg.make_functional(s.kmax);
    auto rows = clt_baseline(s, Phi.phis()[0], cfg.N_list, cfg.replicas);
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/clt_baseline.csv", io::clt_csv(rows));
    write_manifest(cfg, "clt-baseline", {"clt_baseline.csv"});
    for (const auto& r : rows)
        std::cout << "clt-baseline: N=" << r.N << "  var_p " << r.var_particle << " (z "
                  << r.z_particle << ")  var_s " << r.var_spde << " (z " << r.z_spde
                  << ")  target " << r.target << "\n";
    return 0;
}

inline int run_modulated_energy(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    if (s.model.variant != DriftModel::Variant::CoulombGradient)
        throw validation_error("modulated-energy requires drift.variant = coulomb");
    auto rows = modulated_energy_experiment(s, cfg.N_list, cfg.replicas);
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/modulated_energy.csv", io::energy_csv(rows));
    RateFit fit = fit_energy_decay_bootstrap(rows, s.seed);
    nlohmann::json extra;
    extra["fit"] = {{"slope", fit.slope}, {"ci_lo", fit.ci_lo}, {"ci_hi", fit.ci_hi},
                    {"note", "decay fitted on E|F_N|; the signed mean vanishes identically for "
                             "i.i.d. uniform sampling with a mean-zero potential"}};
    write_manifest(cfg, "modulated-energy", {"modulated_energy.csv"}, extra);
    std::cout << "modulated-energy: decay slope " << fit.slope << "  CI [" << fit.ci_lo << ", "
              << fit.ci_hi << "]\n";
    return 0;
}

inline int run_refine(const RunConfig& cfg) {
    const McSetup& s = cfg.setup;
    auto factory = [&](int kmax) { return cfg.make_functional(kmax); };
    auto rows = refinement_study(s, factory, cfg.ladder, cfg.replicas);
    std::filesystem::create_directories(cfg.out_dir);
    io::write_text(cfg.out_dir + "/refinement.csv", io::refinement_csv(rows));
    write_manifest(cfg, "refine", {"refinement.csv"});
    for (const auto& r : rows)
        std::cout << "refine: kmax=" << r.kmax << " L=" << r.L << " n=" << r.n << " dt=" << r.dt
                  << "  E[Phi] " << r.estimate << " +- " << r.se
                  << (r.stall ? "  [stall]" : "") << "\n";
    return 0;
}

int run_selftest(const RunConfig& cfg);  // defined in cli_selftest.hpp

// Map module errors to exit codes: 2 validation / insufficient data,
// 3 numerical.
inline int dispatch(const std::string& subcommand, const RunConfig& cfg) {
    try {
        if (subcommand == "solve-fp") return run_solve_fp(cfg);
        if (subcommand == "simulate-particles") return run_simulate_particles(cfg);
        if (subcommand == "simulate-spde") return run_simulate_spde(cfg);
        if (subcommand == "weak-error") return run_weak_error(cfg);
        if (subcommand == "clt-baseline") return run_clt_baseline(cfg);
        if (subcommand == "modulated-energy") return run_modulated_energy(cfg);
        if (subcommand == "refine") return run_refine(cfg);
        if (subcommand == "selftest") return run_selftest(cfg);
        std::cerr << "unknown subcommand '" << subcommand << "'\n";
        return 2;
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const insufficient_data_error& e) {
        std::cerr << "insufficient data: " << e.what() << "\n";
        return 2;
    } catch (const domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical error in " << subcommand << ": " << e.what() << "\n";
        return 3;
    }
}

}  // namespace fluctlab::cli
