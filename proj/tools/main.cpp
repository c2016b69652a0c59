// Command-line front end; talks to the core exclusively through the C API.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mildhjb/mildhjb.h"

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    long long seed = -1;
    bool has_seed = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config, "scenario config file (JSON)")
        ->required();
    cmd->add_option("--out", opts.out, "output directory override");
    cmd->add_option("--seed", opts.seed, "seed override")
        ->each([&opts](const std::string&) { opts.has_seed = true; });
    cmd->add_flag("--quiet", opts.quiet, "suppress progress notes");
}

int dispatch(const CommonOptions& opts, bool diagnose) {
    mildhjb_scenario* scenario = nullptr;
    if (mildhjb_scenario_create(opts.config.c_str(), &scenario) != MILDHJB_OK) {
        std::fprintf(stderr, "MILDHJB_FAIL INTERNAL could not allocate scenario\n");
        return MILDHJB_ERR_USAGE;
    }
    if (!opts.out.empty()) mildhjb_scenario_set_output_dir(scenario, opts.out.c_str());
    if (opts.has_seed) mildhjb_scenario_set_seed(scenario, opts.seed);
    mildhjb_scenario_set_quiet(scenario, opts.quiet ? 1 : 0);

    const int rc = diagnose ? mildhjb_diagnose(scenario) : mildhjb_run(scenario);
    if (rc != MILDHJB_OK) {
        std::fprintf(stderr, "MILDHJB_FAIL %s %s\n", mildhjb_error_tag(scenario),
                     mildhjb_error_message(scenario));
    }
    mildhjb_scenario_destroy(scenario);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral-truncation solver for non-autonomous Hamilton-Jacobi "
                 "equations in mild form"};
    app.require_subcommand(1);

    CommonOptions run_opts, diag_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "solve the configured scenario");
    add_common(run_cmd, run_opts);
    CLI::App* diag_cmd =
        app.add_subcommand("diagnose", "run the evolution/OU probes and reports");
    add_common(diag_cmd, diag_opts);

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) return dispatch(run_opts, false);
    return dispatch(diag_opts, true);
}
