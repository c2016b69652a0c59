#include "mildhjb/mildhjb.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

void write_file(const std::string& name, const std::string& body) {
    std::ofstream out(name);
    out << body;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Handle {
    mildhjb_scenario* p = nullptr;
    explicit Handle(const char* path) { mildhjb_scenario_create(path, &p); }
    ~Handle() { mildhjb_scenario_destroy(p); }
};

}  // namespace

TEST_CASE("missing config maps to the config exit class") {
    Handle h("definitely_missing.json");
    REQUIRE(h.p != nullptr);
    CHECK(mildhjb_run(h.p) == MILDHJB_ERR_CONFIG);
    CHECK(std::string(mildhjb_error_tag(h.p)) == "CONFIG_MISSING_FILE");
}

TEST_CASE("missing lattice file inside a config carries the same tag") {
    write_file("capi_lattice_cfg.json", R"({
      "coefficients": { "lattice_file": "not_there.csv", "horizon": 1.0 },
      "output_dir": "capi_lat_out"
    })");
    Handle h("capi_lattice_cfg.json");
    CHECK(mildhjb_run(h.p) == MILDHJB_ERR_CONFIG);
    CHECK(std::string(mildhjb_error_tag(h.p)) == "CONFIG_MISSING_FILE");
    std::remove("capi_lattice_cfg.json");
}

TEST_CASE("unknown keys are hard config errors") {
    write_file("capi_unknown.json", R"({"surprise": 1})");
    Handle h("capi_unknown.json");
    CHECK(mildhjb_run(h.p) == MILDHJB_ERR_CONFIG);
    CHECK(std::string(mildhjb_error_tag(h.p)) == "CONFIG_UNKNOWN_KEY");
    std::remove("capi_unknown.json");
}

TEST_CASE("zero-hamiltonian run converges in one correction with exit 0") {
    namespace fs = std::filesystem;
    write_file("capi_zero.json", R"({
      "coefficients": { "builtin": "lp_example", "horizon": 1.0 },
      "modes": 2,
      "time_cells": 8,
      "substeps_per_cell": 2,
      "cubature": { "nodes_per_dim": 5 },
      "hamiltonian": { "kind": "zero" },
      "lattice": { "points_per_dim": 5 },
      "output_dir": "capi_zero_out",
      "seed": 11
    })");
    Handle h("capi_zero.json");
    mildhjb_scenario_set_quiet(h.p, 1);
    CHECK(mildhjb_run(h.p) == MILDHJB_OK);
    const std::string report = slurp("capi_zero_out/report.txt");
    CHECK(report.find("iterations = 1") != std::string::npos);
    CHECK(report.find("converged = true") != std::string::npos);
    std::remove("capi_zero.json");
    fs::remove_all("capi_zero_out");
}

TEST_CASE("seed and output overrides are honored") {
    namespace fs = std::filesystem;
    write_file("capi_seed.json", R"({
      "coefficients": { "builtin": "constant", "horizon": 1.0 },
      "modes": 1,
      "time_cells": 8,
      "substeps_per_cell": 2,
      "cubature": { "nodes_per_dim": 5 },
      "lattice": { "points_per_dim": 5 },
      "output_dir": "ignored_dir",
      "seed": 1
    })");
    Handle h("capi_seed.json");
    mildhjb_scenario_set_quiet(h.p, 1);
    mildhjb_scenario_set_output_dir(h.p, "capi_seed_out");
    mildhjb_scenario_set_seed(h.p, 555);
    CHECK(mildhjb_run(h.p) == MILDHJB_OK);
    CHECK(fs::exists("capi_seed_out/report.txt"));
    CHECK(!fs::exists("ignored_dir"));
    const std::string report = slurp("capi_seed_out/report.txt");
    CHECK(report.find("config.seed = 555") != std::string::npos);
    std::remove("capi_seed.json");
    fs::remove_all("capi_seed_out");
}

TEST_CASE("coarse-grid diagnose exits with the numerical class and FIT_SPAN") {
    namespace fs = std::filesystem;
    write_file("capi_coarse.json", R"({
      "coefficients": { "builtin": "constant", "horizon": 1.0 },
      "modes": 1,
      "time_cells": 2,
      "substeps_per_cell": 1,
      "output_dir": "capi_coarse_out",
      "seed": 1
    })");
    Handle h("capi_coarse.json");
    mildhjb_scenario_set_quiet(h.p, 1);
    CHECK(mildhjb_diagnose(h.p) == MILDHJB_ERR_NUMERICAL);
    CHECK(std::string(mildhjb_error_tag(h.p)) == "FIT_SPAN");
    std::remove("capi_coarse.json");
    fs::remove_all("capi_coarse_out");
}

TEST_CASE("version string is exposed") {
    CHECK(std::string(mildhjb_version()).find('.') != std::string::npos);
}

TEST_CASE("shipped lp_example config runs to convergence with contraction") {
    namespace fs = std::filesystem;
    Handle h(SOURCE_DIR "/configs/lp_example.json");
    mildhjb_scenario_set_quiet(h.p, 1);
    mildhjb_scenario_set_output_dir(h.p, "capi_lp_out");
    CHECK(mildhjb_run(h.p) == MILDHJB_OK);
    const std::string report = slurp("capi_lp_out/report.txt");
    CHECK(report.find("converged = true") != std::string::npos);

    // Iteration table: every ratio from iteration 2 on stays below 0.85.
    std::istringstream in(report);
    std::string line;
    bool table = false;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line == "iter,residual_beta,residual_sup,ratio") {
            table = true;
            continue;
        }
        if (!table || line.empty()) continue;
        ++rows;
        const auto last_comma = line.rfind(',');
        const std::string ratio = line.substr(last_comma + 1);
        if (rows >= 2 && !ratio.empty())
            CHECK(std::strtod(ratio.c_str(), nullptr) <= 0.85);
    }
    CHECK(rows >= 2);
    fs::remove_all("capi_lp_out");
}
