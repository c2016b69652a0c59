#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mildhjb/evolution.hpp"
#include "mildhjb/gaussian.hpp"
#include "mildhjb/hjb.hpp"
#include "mildhjb/ou.hpp"

namespace mildhjb::scenario {

// Fully resolved scenario configuration. Parsed from a JSON file with hard
// errors on unknown keys; every default lives in resolve() and the report
// echoes the resolved values.
struct Config {
    // coefficients
    std::string coeff_builtin = "lp_example";
    std::map<std::string, double> coeff_params;
    std::string coeff_lattice_file;  // empty = use builtin
    double horizon = 1.0;
    std::optional<double> holder_mu;
    double sector_shift_w = 0.0;
    double space_holder_eps = 1.0;

    int modes = 3;
    int time_cells = 16;
    int substeps_per_cell = 4;

    gaussian::Cubature cubature;

    std::optional<double> alpha_override;

    // hamiltonian
    std::string hamiltonian_kind = "zero";
    std::vector<hjb::Control> controls;

    // terminal
    std::string terminal_builtin = "cos_linear";
    std::vector<double> terminal_u;  // cos_linear direction, defaults to ones
    double terminal_cap = 4.0;       // bounded_quadratic cap

    // lattice
    int lattice_points = 9;
    double lattice_half_width = 0.0;  // 0 = auto

    // solver
    double tolerance = 1e-4;
    int max_iterations = 50;
    int time_nodes = 16;
    double pinv_tol = 1e-10;
    int threads = 0;

    // diagnostics
    int diag_triples = 120;
    std::vector<double> gamma_sigmas = {0.25, 0.5, 1.0};
    int gamma_n_max = 100000;

    std::string output_dir = "out";
    std::uint64_t seed = 1234;

    static Config load(const std::string& path);

    // Flat `key = value` echo of every resolved field, sorted by key.
    std::vector<std::pair<std::string, std::string>> flatten() const;
};

struct DiagnoseOutcome {
    bool all_pass = true;
    std::vector<std::string> lines;  // one machine-parseable line per probe
};

class Scenario {
public:
    explicit Scenario(Config config) : config_(std::move(config)) {}

    const Config& config() const { return config_; }
    void set_output_dir(std::string dir) { config_.output_dir = std::move(dir); }
    void set_seed(std::uint64_t seed) { config_.seed = seed; }
    void set_quiet(bool quiet) { quiet_ = quiet; }

    // Full pipeline: evolution -> ou diagnostics -> hjb solve. Writes
    // solution.csv, report.txt and ou_diagnostics.csv into output_dir.
    // Throws ConfigError / NumericalError on typed failures.
    void run();

    // Section 4/5 probes only; writes ou_diagnostics.csv, gamma_series.csv
    // and summary.txt. Throws NumericalError when a probe fails its bound.
    void diagnose();

private:
    Config config_;
    bool quiet_ = false;
};

// Builders shared with the tests.
evolution::CoefficientField build_coefficients(const Config& config);
hjb::Terminal build_terminal(const Config& config, int dim);
hjb::Hamiltonian build_hamiltonian(const Config& config, int dim);

// Round the fitted exponent up to one decimal, the solver's working alpha.
double resolve_alpha(const Config& config, const ou::AlphaFit& fit);

}  // namespace mildhjb::scenario
