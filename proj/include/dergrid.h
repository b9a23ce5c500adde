/* dergrid - DER feedback-optimization co-simulator, C API.
 *
 * Every entry point returns a dergrid_status; on failure a thread-local
 * message is available through dergrid_last_error(). Returned strings are
 * heap-allocated and must be released with dergrid_string_free().
 */

#ifndef DERGRID_H
#define DERGRID_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    DERGRID_OK = 0,
    DERGRID_ERR_PARSE = 1,      /* malformed input document */
    DERGRID_ERR_VALIDATION = 2, /* invariant violation in valid syntax */
    DERGRID_ERR_IO = 3,         /* missing or unwritable file */
    DERGRID_ERR_DIVERGENCE = 4, /* solver or training left the finite regime */
    DERGRID_ERR_DIMENSION = 5,  /* mismatched vector/matrix sizes */
    DERGRID_ERR_NULL_ARGUMENT = 6,
    DERGRID_ERR_INTERNAL = 7
} dergrid_status;

typedef struct dergrid_feeder dergrid_feeder;
typedef struct dergrid_config dergrid_config;

const char* dergrid_version(void);

/* Message describing the most recent failure on this thread. */
const char* dergrid_last_error(void);

void dergrid_string_free(char* s);

/* ---- feeder ---- */

dergrid_status dergrid_feeder_load(const char* path, dergrid_feeder** out);
dergrid_status dergrid_feeder_parse(const char* json_text, dergrid_feeder** out);
void dergrid_feeder_free(dergrid_feeder* feeder);
int dergrid_feeder_node_count(const dergrid_feeder* feeder); /* N, head excluded */
int dergrid_feeder_der_count(const dergrid_feeder* feeder);

/* Backward/forward-sweep power flow. setpoints_json is either NULL (all DERs
 * at zero) or {"der_setpoints":[{"node":..,"p_kw":..,"q_kvar":..}, ...]}.
 * The solution is returned as a JSON document. */
dergrid_status dergrid_solve_power_flow(const dergrid_feeder* feeder,
                                        const char* setpoints_json, double tol,
                                        int max_iter, char** solution_json_out);

/* Sensitivity model bundle as JSON. numeric=0 gives the analytic construction;
 * numeric=1 central finite differences with the given step (p.u.). */
dergrid_status dergrid_linearize(const dergrid_feeder* feeder, int numeric, double step,
                                 char** model_json_out);

/* ---- experiment configuration ---- */

dergrid_status dergrid_config_load(const char* path, dergrid_config** out);
void dergrid_config_free(dergrid_config* config);
dergrid_status dergrid_config_set_delay_seed(dergrid_config* config, uint64_t seed);
dergrid_status dergrid_config_set_output_dir(dergrid_config* config, const char* dir);
dergrid_status dergrid_config_set_strategy(dergrid_config* config, const char* strategy);

/* ---- operations ---- */

/* Full closed-loop experiment. Writes results.csv, messages.csv, metrics.json
 * and the SVG plots under the configured output directory; returns the run
 * metrics as JSON. */
dergrid_status dergrid_run(const dergrid_config* config, char** metrics_json_out);

/* Sensitivity sweep over loss rates x directions x strategies. directions_csv
 * is "uplink", "downlink" or "uplink,downlink"; strategies_csv a comma list of
 * prev|skip|lstm. Writes sweep.csv / sweep.svg and returns the table text. */
dergrid_status dergrid_sweep(const dergrid_config* config, const double* rates, int n_rates,
                             const char* directions_csv, const char* strategies_csv,
                             int seeds, char** table_csv_out);

/* Trains one forecaster per measured node from ideal-network episodes and
 * writes the model files; returns the training report as JSON. */
dergrid_status dergrid_train(const dergrid_config* config, char** report_json_out);

/* Delay threshold d* for a target loss rate. samples <= 0 uses the configured
 * calibration sample count. */
dergrid_status dergrid_calibrate_delay(const dergrid_config* config, double rate,
                                       long samples, double* d_star_ms_out);

#ifdef __cplusplus
}
#endif

#endif /* DERGRID_H */
