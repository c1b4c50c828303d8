#include <catch2/catch_amalgamated.hpp>
#include <fluctlab/cli.hpp>
#include <fluctlab/cli_selftest.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace fluctlab;
namespace fs = std::filesystem;

#ifndef FLUCTLAB_BIN
#define FLUCTLAB_BIN "fluctlab"
#endif

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(FLUCTLAB_BIN) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string scratch_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("fluctlab_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("config resolution") {
    SECTION("minimal d=1 config fills defaults") {
        auto cfg = cli::resolve_config({{"domain.d", "1"}, {"domain.lambda", "2.0"}});
        CHECK(cfg.setup.kmax == 16);
        CHECK(cfg.setup.L_noise == 16);                       // defaults to kmax
        CHECK(cfg.setup.dt == Catch::Approx(0.25 / 2000.0));  // t_final/2000
        CHECK(cfg.setup.idx.lambda == 2.0);
        CHECK(cfg.N_list.size() == 6);
    }
    SECTION("every violated constraint is reported, not just the first") {
        try {
            cli::resolve_config({{"domain.d", "1"},
                                 {"domain.lambda", "1.4"},
                                 {"dynamics.dt", "-1"},
                                 {"domain.kmax", "1"}});
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            std::string msg = e.what();
            CHECK(msg.find("lambda > 1.5*d") != std::string::npos);
            CHECK(msg.find("dt > 0") != std::string::npos);
            CHECK(msg.find("kmax >= 2") != std::string::npos);
        }
    }
    SECTION("biot-savart outside d=2 is rejected") {
        try {
            cli::resolve_config({{"domain.d", "3"},
                                 {"domain.lambda", "4.6"},
                                 {"domain.lambda_prime", "6.0"},
                                 {"drift.variant", "biot_savart"}});
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("d=2 only") != std::string::npos);
        }
    }
    SECTION("unknown keys name the nearest valid key") {
        try {
            cli::resolve_config({{"domain.d", "1"}, {"domain.kmaxx", "8"}});
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            std::string msg = e.what();
            CHECK(msg.find("unknown key 'domain.kmaxx'") != std::string::npos);
            CHECK(msg.find("domain.kmax") != std::string::npos);
        }
    }
}

TEST_CASE("field dump round trips") {
    SpectralField f(2, 3);
    f.at({1, -2, 0}) = cplx(0.25, -1.5);
    f.at({0, 0, 0}) = 1.0;
    std::string dir = scratch_dir("dumps");
    io::write_field_json(f, dir + "/f.json");
    SpectralField fj = io::read_field_json(dir + "/f.json");
    io::write_field_binary(f, dir + "/f.bin");
    SpectralField fb = io::read_field_binary(dir + "/f.bin");
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(fj[i] == f[i]);
        CHECK(fb[i] == f[i]);
    }
    // magic guard
    write_file(dir + "/bad.bin", "XXXXX");
    CHECK_THROWS_AS(io::read_field_binary(dir + "/bad.bin"), domain_error);
}

TEST_CASE("cli end to end", "[cli]") {
    SECTION("selftest exits 0") { CHECK(run_cli("selftest") == 0); }
    SECTION("invalid config exits 2") {
        std::string dir = scratch_dir("bad");
        write_file(dir + "/c.ini", "[domain]\nd = 1\nlambda = 1.4\n");
        CHECK(run_cli("solve-fp --config " + dir + "/c.ini") == 2);
    }
    SECTION("weak-error with 2 N values exits 2 via insufficient data") {
        std::string dir = scratch_dir("insuf");
        write_file(dir + "/c.ini",
                   "[domain]\nd = 1\nkmax = 4\n[dynamics]\nt_final = 0.02\ndt = 0.01\n"
                   "[experiment]\nN_list = 8,16\nreplicas_particle = 20\nreplicas_spde = 20\n"
                   "[functional]\nouter = linear\nphis = 1:16\nscales = 1.0\noffsets =\n");
        CHECK(run_cli("weak-error --config " + dir + "/c.ini --out " + dir + "/out") == 2);
    }
    SECTION("solve-fp heat preset reproduces the closed-form mode") {
        std::string dir = scratch_dir("heat");
        write_file(dir + "/c.ini",
                   "[domain]\nd = 1\nkmax = 8\n[dynamics]\nsigma = 1.0\nt_final = 0.1\ndt = 0.001\n"
                   "[drift]\npreset = zero\n[init]\nmu0 = cosine\nmu0_amp = 0.5\n"
                   "[experiment]\nn_outputs = 2\n");
        CHECK(run_cli("solve-fp --config " + dir + "/c.ini --out " + dir + "/out") == 0);
        SpectralField mu = io::read_field_json(dir + "/out/mu_2.json");
        double expect = 0.25 * std::exp(-0.5 * two_pi * two_pi * 0.1);
        CHECK(mu.at({1, 0, 0}).real() == Catch::Approx(expect).epsilon(1e-10));
        CHECK(fs::exists(dir + "/out/manifest.json"));
        CHECK(fs::exists(dir + "/out/curve_index.json"));
    }
    SECTION("reruns are byte-identical across thread counts") {
        std::string dir = scratch_dir("repro");
        write_file(dir + "/c.ini",
                   "[domain]\nd = 1\nkmax = 6\n[dynamics]\nt_final = 0.02\ndt = 0.002\n"
                   "[experiment]\nN_list = 8,16,32\nreplicas_particle = 60\nreplicas_spde = 60\n"
                   "[functional]\nouter = tanh_product\nphis = 1:16; 2:250\n"
                   "scales = 0.9, 0.8\noffsets = 0.2, -0.1\n");
        // rate fitting may legitimately fail on these tiny pools; compare rows only
        run_cli("weak-error --config " + dir + "/c.ini --seed 7 --threads 1 --out " + dir + "/a");
        run_cli("weak-error --config " + dir + "/c.ini --seed 7 --threads 8 --out " + dir + "/b");
        REQUIRE(fs::exists(dir + "/a/weak_error.csv"));
        REQUIRE(fs::exists(dir + "/b/weak_error.csv"));
        CHECK(io::read_text(dir + "/a/weak_error.csv") == io::read_text(dir + "/b/weak_error.csv"));
    }
    SECTION("manifest embeds the resolved config and a content hash") {
        std::string dir = scratch_dir("manifest");
        write_file(dir + "/c.ini", "[domain]\nd = 1\nkmax = 4\n[dynamics]\nt_final = 0.01\ndt = 0.005\n[drift]\npreset = zero\n");
        CHECK(run_cli("solve-fp --config " + dir + "/c.ini --out " + dir + "/out") == 0);
        auto j = nlohmann::json::parse(io::read_text(dir + "/out/manifest.json"));
        CHECK(j.at("config").at("dynamics.dt").get<std::string>() == "0.005");
        CHECK(j.at("config").at("spde.L_noise").get<std::string>() == "4");  // resolved, not raw
        CHECK(j.at("content_hash").get<std::string>().size() == 40);
        CHECK(j.at("spde").at("kmax").get<int>() == 4);
    }
}

TEST_CASE("sha1 known vector") {
    CHECK(io::Sha1::hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(io::Sha1::hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
}
