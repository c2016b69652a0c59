#include "mildhjb/mildhjb.h"

#include <exception>
#include <optional>
#include <string>

#include "mildhjb/errors.hpp"
#include "mildhjb/scenario.hpp"

struct mildhjb_scenario {
    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<long long> seed;
    bool quiet = false;
    std::string tag;
    std::string message;
};

namespace {

int guarded(mildhjb_scenario* s, int (*body)(mildhjb_scenario*)) {
    s->tag.clear();
    s->message.clear();
    try {
        return body(s);
    } catch (const mildhjb::ConfigError& e) {
        s->tag = e.tag();
        s->message = e.what();
        return MILDHJB_ERR_CONFIG;
    } catch (const mildhjb::NumericalError& e) {
        s->tag = e.tag();
        s->message = e.what();
        return MILDHJB_ERR_NUMERICAL;
    } catch (const std::exception& e) {
        s->tag = "INTERNAL";
        s->message = e.what();
        return MILDHJB_ERR_USAGE;
    }
}

mildhjb::scenario::Scenario make_scenario(const mildhjb_scenario* s) {
    mildhjb::scenario::Config config = mildhjb::scenario::Config::load(s->config_path);
    mildhjb::scenario::Scenario scenario(std::move(config));
    if (s->output_dir) scenario.set_output_dir(*s->output_dir);
    if (s->seed) scenario.set_seed(static_cast<std::uint64_t>(*s->seed));
    scenario.set_quiet(s->quiet);
    return scenario;
}

}  // namespace

extern "C" {

int mildhjb_scenario_create(const char* config_path, mildhjb_scenario** out) {
    if (!config_path || !out) return MILDHJB_ERR_USAGE;
    *out = new (std::nothrow) mildhjb_scenario;
    if (!*out) return MILDHJB_ERR_USAGE;
    (*out)->config_path = config_path;
    return MILDHJB_OK;
}

void mildhjb_scenario_destroy(mildhjb_scenario* scenario) { delete scenario; }

int mildhjb_scenario_set_output_dir(mildhjb_scenario* scenario, const char* dir) {
    if (!scenario || !dir) return MILDHJB_ERR_USAGE;
    scenario->output_dir = dir;
    return MILDHJB_OK;
}

int mildhjb_scenario_set_seed(mildhjb_scenario* scenario, long long seed) {
    if (!scenario) return MILDHJB_ERR_USAGE;
    scenario->seed = seed;
    return MILDHJB_OK;
}

int mildhjb_scenario_set_quiet(mildhjb_scenario* scenario, int quiet) {
    if (!scenario) return MILDHJB_ERR_USAGE;
    scenario->quiet = quiet != 0;
    return MILDHJB_OK;
}

int mildhjb_run(mildhjb_scenario* scenario) {
    if (!scenario) return MILDHJB_ERR_USAGE;
    return guarded(scenario, [](mildhjb_scenario* s) {
        make_scenario(s).run();
        return MILDHJB_OK;
    });
}

int mildhjb_diagnose(mildhjb_scenario* scenario) {
    if (!scenario) return MILDHJB_ERR_USAGE;
    return guarded(scenario, [](mildhjb_scenario* s) {
        make_scenario(s).diagnose();
        return MILDHJB_OK;
    });
}

const char* mildhjb_error_tag(const mildhjb_scenario* scenario) {
    return scenario ? scenario->tag.c_str() : "";
}

const char* mildhjb_error_message(const mildhjb_scenario* scenario) {
    return scenario ? scenario->message.c_str() : "";
}

const char* mildhjb_version(void) { return "0.1.0"; }

}  // extern "C"
