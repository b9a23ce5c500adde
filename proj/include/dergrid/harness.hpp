#pragma once

#include <functional>
#include <optional>

#include "dergrid/scenario.hpp"

namespace dergrid {

// Everything a run needs, materialized once per scenario.
struct ScenarioData {
    FeederModel feeder;
    LinearGridModel model;
    SetpointSchedule schedule;            // p.u.
    std::vector<Profile> pv_kw;           // availability per DER (der_slots order)
    Profile load_scale;                   // multiplicative factor on nominal load
    std::vector<Profile> q_variation;     // per slot; empty when the node has no load
    Vec env_lo, env_hi;                   // feasible head-power band per second, p.u.
    double d_star_ms = 0.0;
};

struct ResultRow {
    long t_s = 0;
    double p0_kw = 0.0;
    double p0_set_kw = 0.0;
    double tracking_err_kw = 0.0;
    double v_min_pu = 0.0;
    double v_max_pu = 0.0;
    double dual_norm = 0.0;
    long late_msgs = 0;
};

struct RunMetrics {
    double tracking_rmse_kw = 0.0;
    double tracking_rmse_pu = 0.0;
    double steady_max_tracking_err_pu = 0.0;
    long voltage_violation_count = 0;         // node-samples beyond the tolerance band
    long voltage_violations_after_300s = 0;
    double max_voltage_excursion_pu = 0.0;    // worst overshoot past [v_min, v_max]
    std::optional<double> forecast_rmse_pu;   // LSTM strategy only
    long forecast_samples = 0;
    long lstm_fallback_count = 0;
    long late_message_count = 0;
    long total_message_count = 0;
    long iterations = 0;
};

struct RunOutputs {
    RunMetrics metrics;
    std::vector<ResultRow> rows;
    std::vector<MessageRecord> messages;
    // True measured-node voltages (p.u.), measured_slots order; filled when
    // requested (training data collection).
    std::vector<std::vector<double>> true_voltages;
};

struct SimulationState {
    long t_k = 0;
    DualState duals;
    std::vector<DerSetpoint> setpoints;        // der_slots order
    std::vector<DualState> agent_duals;        // per-DER copy (downlink semantics)
    std::vector<std::vector<double>> history;  // resolved voltage series per measured node
    std::vector<double> last_on_time;          // per measured node
    std::vector<long> last_on_time_age;        // iterations since the last on-time message
    double last_p0 = 0.0;
};

struct RunOverrides {
    std::optional<Strategy> strategy;
    std::optional<double> loss_rate;            // recalibrates d* when set
    std::optional<std::string> direction;       // uplink | downlink | none
    std::optional<std::uint64_t> delay_seed;
    const SetpointSchedule* schedule = nullptr; // training episodes swap it out
    bool collect_true_voltages = false;
    // Ordered event hook for the per-iteration procedure; used by tests.
    std::function<void(long, const char*)> on_event;
};

// Materializes feeder, linear model, profiles, envelope, schedule and the
// delay threshold from the configuration.
ScenarioData build_scenario(const ExperimentConfig& cfg);

// Regenerates only the setpoint schedule (training episodes draw fresh ones).
SetpointSchedule reschedule(const ScenarioData& scenario, std::uint64_t seed);

// One control iteration: solve the grid at the current dispatch, classify
// arrivals, resolve late messages per strategy, update duals, broadcast,
// primal-update every DER, record metrics, advance t_k.
void run_iteration(SimulationState& state, const ScenarioData& scenario,
                   const ExperimentConfig& cfg, Strategy strategy,
                   const std::string& direction, DelaySampler& sampler,
                   const ForecastRegistry* registry, RunOutputs& out,
                   const std::function<void(long, const char*)>& on_event = {});

// Full-horizon loop. Does not touch the filesystem.
RunOutputs simulate(const ExperimentConfig& cfg, const ScenarioData& scenario,
                    const ForecastRegistry* registry, const RunOverrides& overrides = {});

// simulate + results/message CSVs, metrics JSON and SVG plots under
// cfg.output_dir. Returns the metrics.
RunOutputs run_experiment(const ExperimentConfig& cfg);

struct SweepCell {
    std::string direction;
    Strategy strategy = Strategy::PreviousValue;
    double rate = 0.0;
    std::uint64_t seed = 0;
    double tracking_rmse_kw = 0.0;
};

struct SweepResult {
    std::vector<SweepCell> cells;        // one per (direction, strategy, rate, seed)
    std::vector<SweepCell> averaged;     // seed field unused, rmse = mean over seeds
};

// One run per (rate, direction, strategy, seed): seeds vary only the message
// realization so strategies stay paired. rate 0 runs the ideal network.
SweepResult run_sensitivity_sweep(const ExperimentConfig& cfg, const std::vector<double>& rates,
                                  const std::vector<std::string>& directions,
                                  const std::vector<Strategy>& strategies, int seeds);

// Writes sweep.csv and sweep.svg under cfg.output_dir.
void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& result);

struct NodeTrainReport {
    NodeId node = 0;
    double final_train_rmse = 0.0;
    double holdout_rmse = 0.0;
    std::string model_path;
    bool diverged = false;
    std::string error;
};

struct TrainReport {
    std::vector<NodeTrainReport> nodes;
};

// Runs seeded ideal-network episodes, logs per-node voltages, trains one
// forecaster per measured node and writes the model files plus a training
// report JSON into cfg.lstm.model_dir.
TrainReport train_forecasters(const ExperimentConfig& cfg);

// Loads every measured node's model from cfg.lstm.model_dir. Throws IoError
// naming the first missing file.
ForecastRegistry load_registry(const ExperimentConfig& cfg, const FeederModel& feeder);

// Text serialization used by every CSV writer: 17 significant digits.
std::string format_g17(double v);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);
void write_messages_csv(const std::vector<MessageRecord>& messages, const std::string& path);
std::string metrics_to_json(const RunMetrics& m);

} // namespace dergrid
