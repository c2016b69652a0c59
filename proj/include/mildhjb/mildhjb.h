/* C interface to the mildhjb shared library.
 *
 * A scenario is an opaque handle bound to a JSON config file. All calls
 * return one of the MILDHJB_* status codes; on failure the handle carries a
 * one-word machine-readable tag and a human-readable message.
 */
#ifndef MILDHJB_H
#define MILDHJB_H

#ifdef __cplusplus
extern "C" {
#endif

#define MILDHJB_OK 0
#define MILDHJB_ERR_CONFIG 1    /* bad config file / missing inputs */
#define MILDHJB_ERR_NUMERICAL 2 /* typed numerical failure */
#define MILDHJB_ERR_USAGE 3     /* API misuse or unexpected error */

typedef struct mildhjb_scenario mildhjb_scenario;

/* Binds a handle to a config path. The file is read on run/diagnose. */
int mildhjb_scenario_create(const char* config_path, mildhjb_scenario** out);
void mildhjb_scenario_destroy(mildhjb_scenario* scenario);

int mildhjb_scenario_set_output_dir(mildhjb_scenario* scenario, const char* dir);
int mildhjb_scenario_set_seed(mildhjb_scenario* scenario, long long seed);
int mildhjb_scenario_set_quiet(mildhjb_scenario* scenario, int quiet);

/* Full pipeline: evolution -> ou diagnostics -> hjb solve; writes
 * solution.csv, report.txt, ou_diagnostics.csv into the output dir. */
int mildhjb_run(mildhjb_scenario* scenario);

/* Evolution/OU probes only; writes ou_diagnostics.csv, gamma_series.csv and
 * summary.txt. Returns MILDHJB_OK iff every probe passed. */
int mildhjb_diagnose(mildhjb_scenario* scenario);

/* Valid until the next call on the same handle. */
const char* mildhjb_error_tag(const mildhjb_scenario* scenario);
const char* mildhjb_error_message(const mildhjb_scenario* scenario);

const char* mildhjb_version(void);

#ifdef __cplusplus
}
#endif

#endif /* MILDHJB_H */
