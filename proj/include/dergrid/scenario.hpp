#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dergrid/control.hpp"
#include "dergrid/cyber.hpp"

namespace dergrid {

// Time series sampled at 1 s. Values carry whatever unit the producer
// declares (kW for PV availability, a dimensionless factor for load scaling).
struct Profile {
    std::vector<double> samples;

    int length_s() const { return static_cast<int>(samples.size()); }
    double at(int t_s) const {
        if (t_s < 0 || t_s >= length_s())
            throw ValidationError("profile: time " + std::to_string(t_s) + " outside [0," +
                                  std::to_string(length_s()) + ")");
        return samples[t_s];
    }
};

struct ScheduleSegment {
    enum class Kind { Constant, Ramp, StepTrain };
    Kind kind = Kind::Constant;
    double start_s = 0.0;
    double end_s = 0.0;
    double level_a = 0.0;        // Constant level / ramp start
    double level_b = 0.0;        // ramp end
    double step_s = 60.0;        // StepTrain block length
    std::vector<double> levels;  // StepTrain levels
};

// Head-power setpoint P0_set(t) in p.u. Segments tile [0, horizon) without
// gaps or overlaps.
struct SetpointSchedule {
    std::vector<ScheduleSegment> segments;
    double horizon_s = 0.0;

    double value_at(double t_s) const;
    void validate() const;
};

// Composite schedule shaped like a two-hour dispatch day: a half hour of
// 5-minute economic dispatch levels, ramps, a 65-minute constant command and a
// closing train of 1-minute AGC steps. Levels are drawn seeded inside the
// feasible head-power envelope [env_lo(t), env_hi(t)] (p.u., one entry per
// second). Requires horizon >= 7200 s.
SetpointSchedule generate_setpoint_schedule(int horizon_s, const Vec& env_lo, const Vec& env_hi,
                                            std::uint64_t seed);

// Clear-sky bell over the day (sunrise 06:00, sunset 20:00, indices are
// seconds since midnight) scaled to `capacity_kw` and multiplied by a seeded
// cloud attenuation process confined to [0.2, 1]: a slow meander plus a small
// fast quasi-periodic flicker component.
Profile generate_pv_profile(int horizon_s, double capacity_kw, std::uint64_t cloud_seed);

// Slowly varying multiplicative load factor around 1.0 (+-8%).
Profile generate_load_scaling(int horizon_s, std::uint64_t seed);

// Zero-mean, unit-variance second-scale churn (quasi-periodic AR mix). The
// harness scales this onto reactive demand; its short periods are what give a
// trained forecaster an edge over holding the previous value.
Profile generate_fast_variation(int horizon_s, std::uint64_t seed);

// CSV with header "t_s,value" and uniform 1 s steps.
Profile load_profile_csv(const std::string& path, bool require_nonnegative = true);
void save_profile_csv(const Profile& profile, const std::string& path);

struct DelayConfig {
    DelayModel model;
    std::optional<double> d_star_ms;  // absent: calibrate from loss_rate
    double loss_rate = 0.01;
    long calibration_samples = 1000000;
    double window_start_s = 1800.0;
    double window_end_s = 5400.0;
    std::string direction = "uplink";  // uplink | downlink | none
    bool head_power_delayed = false;
};

struct LstmConfig {
    std::string model_dir = "models";
    int lookback = 10;
    int hidden_size = 16;
    int epochs = 60;
    double learning_rate = 0.05;
    int batch = 64;
    int train_episodes = 1;
    std::uint64_t train_seed = 101;
    double holdout_fraction = 0.2;
};

struct ExperimentConfig {
    std::string feeder_path;
    std::string output_dir = "out";
    int horizon_s = 7200;
    int start_of_day_s = 43200;        // experiment clock maps t=0 to 12:00
    ControlParams control;
    DelayConfig delay;
    Strategy strategy = Strategy::LstmForecast;
    std::uint64_t schedule_seed = 7;
    std::uint64_t cloud_seed = 11;
    std::uint64_t load_seed = 13;
    double load_q_variation = 0.15;  // fast reactive churn, fraction of nominal Q
    std::optional<std::string> pv_csv;    // overrides the generated PV profile
    std::optional<std::string> load_csv;  // overrides the generated load scaling
    LstmConfig lstm;
    double solver_tol = 1e-8;
    int solver_max_iter = 100;
    double violation_tol_pu = 1e-3;
    int settle_s = 60;   // steady-segment metric ignores this long after a level change

    void validate() const;
};

// Reads the experiment configuration JSON. Relative paths inside the document
// are resolved against the config file's directory.
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig config_from_json(const std::string& json_text, const std::string& base_dir);

} // namespace dergrid
