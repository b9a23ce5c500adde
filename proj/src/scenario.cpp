#include "dergrid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dergrid/rng.hpp"

namespace dergrid {

using nlohmann::json;
namespace fs = std::filesystem;

double SetpointSchedule::value_at(double t_s) const {
    for (const auto& seg : segments) {
        if (t_s < seg.start_s || t_s >= seg.end_s) continue;
        switch (seg.kind) {
            case ScheduleSegment::Kind::Constant:
                return seg.level_a;
            case ScheduleSegment::Kind::Ramp: {
                const double f = (t_s - seg.start_s) / (seg.end_s - seg.start_s);
                return seg.level_a + f * (seg.level_b - seg.level_a);
            }
            case ScheduleSegment::Kind::StepTrain: {
                const auto idx = static_cast<std::size_t>((t_s - seg.start_s) / seg.step_s);
                return seg.levels[std::min(idx, seg.levels.size() - 1)];
            }
        }
    }
    throw ValidationError("setpoint schedule: time " + std::to_string(t_s) +
                          " outside [0," + std::to_string(horizon_s) + ")");
}

void SetpointSchedule::validate() const {
    if (segments.empty()) throw ValidationError("setpoint schedule: no segments");
    double cursor = 0.0;
    for (const auto& seg : segments) {
        if (seg.start_s != cursor)
            throw ValidationError("setpoint schedule: gap or overlap at t=" + std::to_string(seg.start_s));
        if (seg.end_s <= seg.start_s)
            throw ValidationError("setpoint schedule: empty segment at t=" + std::to_string(seg.start_s));
        if (seg.kind == ScheduleSegment::Kind::StepTrain) {
            if (seg.levels.empty() || seg.step_s <= 0.0)
                throw ValidationError("setpoint schedule: malformed step train");
            for (double v : seg.levels)
                if (!std::isfinite(v)) throw ValidationError("setpoint schedule: non-finite level");
        }
        if (!std::isfinite(seg.level_a) || !std::isfinite(seg.level_b))
            throw ValidationError("setpoint schedule: non-finite level");
        cursor = seg.end_s;
    }
    if (cursor != horizon_s)
        throw ValidationError("setpoint schedule: segments end at " + std::to_string(cursor) +
                              ", horizon is " + std::to_string(horizon_s));
}

namespace {

// Worst-case feasible band of a block: the setpoint must stay inside the
// envelope at every second it covers.
std::pair<double, double> block_band(const Vec& env_lo, const Vec& env_hi, int a, int b) {
    double lo = -1e300, hi = 1e300;
    for (int t = a; t < b; ++t) {
        lo = std::max(lo, env_lo[t]);
        hi = std::min(hi, env_hi[t]);
    }
    if (lo >= hi) {
        const double mid = 0.5 * (lo + hi);
        return {mid, mid};
    }
    return {lo, hi};
}

double draw_level(Rng& rng, std::pair<double, double> band, double u_lo, double u_hi) {
    const double u = rng.uniform(u_lo, u_hi);
    return band.first + u * (band.second - band.first);
}

} // namespace

SetpointSchedule generate_setpoint_schedule(int horizon_s, const Vec& env_lo, const Vec& env_hi,
                                            std::uint64_t seed) {
    if (horizon_s < 7200)
        throw ValidationError("setpoint schedule: horizon must be at least 7200 s, got " +
                              std::to_string(horizon_s));
    if (static_cast<int>(env_lo.size()) < horizon_s || static_cast<int>(env_hi.size()) < horizon_s)
        throw DimensionError("setpoint schedule: envelope shorter than horizon");

    Rng rng(seed);
    SetpointSchedule sched;
    sched.horizon_s = horizon_s;

    // 12:00-12:30, six 5-minute economic dispatch commands.
    double last_level = 0.0;
    for (int k = 0; k < 6; ++k) {
        ScheduleSegment seg;
        seg.kind = ScheduleSegment::Kind::Constant;
        seg.start_s = 300.0 * k;
        seg.end_s = 300.0 * (k + 1);
        seg.level_a = draw_level(rng, block_band(env_lo, env_hi, 300 * k, 300 * (k + 1)), 0.35, 0.70);
        last_level = seg.level_a;
        sched.segments.push_back(seg);
    }

    // The 65-minute constant command (12:40-13:45); drawn before the ramps so
    // they can land on it. Biased high: midday PV is held partly in reserve.
    const double const_level = draw_level(rng, block_band(env_lo, env_hi, 2400, 6300), 0.55, 0.80);
    const double mid_level = draw_level(rng, block_band(env_lo, env_hi, 1800, 2400), 0.40, 0.75);

    // 12:30-12:40, two ramp signals.
    ScheduleSegment ramp1;
    ramp1.kind = ScheduleSegment::Kind::Ramp;
    ramp1.start_s = 1800.0;
    ramp1.end_s = 2100.0;
    ramp1.level_a = last_level;
    ramp1.level_b = mid_level;
    sched.segments.push_back(ramp1);
    ScheduleSegment ramp2;
    ramp2.kind = ScheduleSegment::Kind::Ramp;
    ramp2.start_s = 2100.0;
    ramp2.end_s = 2400.0;
    ramp2.level_a = mid_level;
    ramp2.level_b = const_level;
    sched.segments.push_back(ramp2);

    ScheduleSegment big;
    big.kind = ScheduleSegment::Kind::Constant;
    big.start_s = 2400.0;
    big.end_s = 6300.0;
    big.level_a = const_level;
    sched.segments.push_back(big);

    // 13:45 to the end, 1-minute automatic generation control steps.
    ScheduleSegment agc;
    agc.kind = ScheduleSegment::Kind::StepTrain;
    agc.start_s = 6300.0;
    agc.end_s = horizon_s;
    agc.step_s = 60.0;
    const int steps = static_cast<int>((horizon_s - 6300 + 59) / 60);
    for (int k = 0; k < steps; ++k) {
        const int a = 6300 + 60 * k;
        const int b = std::min(a + 60, horizon_s);
        agc.levels.push_back(draw_level(rng, block_band(env_lo, env_hi, a, b), 0.40, 0.75));
    }
    sched.segments.push_back(agc);

    sched.validate();
    return sched;
}

namespace {

constexpr double kSunriseS = 21600.0;  // 06:00
constexpr double kSunsetS = 72000.0;   // 20:00

double clear_sky_bell(double t_day_s) {
    if (t_day_s <= kSunriseS || t_day_s >= kSunsetS) return 0.0;
    const double s = (t_day_s - kSunriseS) / (kSunsetS - kSunriseS);
    return std::pow(std::sin(M_PI * s), 1.2);
}

// Sum of a few seeded sinusoids; slow, zero-mean, bounded by the sum of the
// amplitudes.
struct Meander {
    struct Wave { double amp, period_s, phase; };
    std::vector<Wave> waves;

    Meander(Rng& rng, int count, double base_amp, double min_period, double max_period) {
        for (int k = 0; k < count; ++k)
            waves.push_back({base_amp / (k + 1), rng.uniform(min_period, max_period),
                             rng.uniform(0.0, 2.0 * M_PI)});
    }

    double at(double t) const {
        double v = 0.0;
        for (const auto& w : waves) v += w.amp * std::sin(2.0 * M_PI * t / w.period_s + w.phase);
        return v;
    }
};

} // namespace

Profile generate_pv_profile(int horizon_s, double capacity_kw, std::uint64_t cloud_seed) {
    if (capacity_kw <= 0.0) throw ValidationError("pv profile: capacity must be > 0");
    Rng rng(cloud_seed);
    Meander clouds(rng, 4, 0.10, 900.0, 2700.0);

    Profile p;
    p.samples.resize(horizon_s);
    for (int t = 0; t < horizon_s; ++t) {
        const double atten = std::clamp(0.86 + clouds.at(t), 0.2, 1.0);
        p.samples[t] = capacity_kw * clear_sky_bell(t) * atten;
    }
    return p;
}

Profile generate_load_scaling(int horizon_s, std::uint64_t seed) {
    Rng rng(seed);
    Meander drift(rng, 3, 0.05, 1200.0, 3600.0);
    Profile p;
    p.samples.resize(horizon_s);
    for (int t = 0; t < horizon_s; ++t)
        p.samples[t] = std::clamp(1.0 + drift.at(t), 0.85, 1.15);
    return p;
}

Profile generate_fast_variation(int horizon_s, std::uint64_t seed) {
    Rng rng(seed);
    // Resonant second-order processes: short-period churn that a one-step
    // forecaster can learn but a held-previous-value cannot follow.
    struct Ar2 {
        double c1, c2, x1 = 0.0, x2 = 0.0;
        double step(double e) {
            const double x = c1 * x1 + c2 * x2 + e;
            x2 = x1;
            x1 = x;
            return x;
        }
    };
    const double rho_a = 0.85, period_a = 3.0;
    const double rho_b = 0.90, period_b = 7.0;
    Ar2 a{2.0 * rho_a * std::cos(2.0 * M_PI / period_a), -rho_a * rho_a};
    Ar2 b{2.0 * rho_b * std::cos(2.0 * M_PI / period_b), -rho_b * rho_b};

    Profile p;
    p.samples.resize(horizon_s);
    const int warmup = 200;
    for (int t = -warmup; t < horizon_s; ++t) {
        const double v = a.step(rng.normal()) + 0.6 * b.step(rng.normal());
        if (t >= 0) p.samples[t] = v;
    }
    // Normalize to unit standard deviation so callers scale in one place.
    double mean = 0.0, var = 0.0;
    for (double v : p.samples) mean += v;
    mean /= horizon_s;
    for (double v : p.samples) var += (v - mean) * (v - mean);
    var /= horizon_s;
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& v : p.samples) v = (v - mean) * inv;
    return p;
}

Profile load_profile_csv(const std::string& path, bool require_nonnegative) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    // Tolerate trailing CR from foreign line endings.
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_s,value")
        throw ParseError(path + ": expected header 't_s,value', got '" + line + "'");

    Profile p;
    long row = 1;
    long expected_t = -1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ": row " + std::to_string(row) + ": expected 't_s,value'");
        long t;
        double v;
        try {
            std::size_t used = 0;
            t = std::stol(line.substr(0, comma), &used);
            if (used != comma) throw std::invalid_argument("trailing");
            const std::string vs = line.substr(comma + 1);
            v = std::stod(vs, &used);
            if (used != vs.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(path + ": row " + std::to_string(row) + ": non-numeric value");
        }
        if (expected_t < 0) expected_t = t;
        if (t != expected_t)
            throw ParseError(path + ": row " + std::to_string(row) + ": timestamp " +
                             std::to_string(t) + " breaks the uniform 1 s grid (expected " +
                             std::to_string(expected_t) + ")");
        if (require_nonnegative && v < 0.0)
            throw ParseError(path + ": row " + std::to_string(row) + ": negative value " +
                             std::to_string(v));
        if (!std::isfinite(v))
            throw ParseError(path + ": row " + std::to_string(row) + ": non-finite value");
        p.samples.push_back(v);
        ++expected_t;
    }
    if (p.samples.empty()) throw ParseError(path + ": no samples");
    return p;
}

void save_profile_csv(const Profile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile file: " + path);
    out << "t_s,value\n";
    char buf[64];
    for (int t = 0; t < profile.length_s(); ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, profile.samples[t]);
        out << buf;
    }
}

void ExperimentConfig::validate() const {
    if (feeder_path.empty()) throw ValidationError("config: feeder path is required");
    if (horizon_s < 1) throw ValidationError("config: horizon_s must be >= 1");
    control.validate();
    delay.model.validate();
    if (delay.loss_rate <= 0.0 || delay.loss_rate >= 1.0)
        throw ValidationError("config: delay.loss_rate must lie in (0,1)");
    if (delay.window_start_s < 0.0 || delay.window_end_s > horizon_s ||
        delay.window_start_s > delay.window_end_s)
        throw ValidationError("config: delay window must lie inside the horizon");
    if (delay.direction != "uplink" && delay.direction != "downlink" && delay.direction != "none")
        throw ValidationError("config: delay.direction must be uplink | downlink | none");
    if (lstm.lookback < 1) throw ValidationError("config: lstm.lookback must be >= 1");
    if (solver_tol <= 0.0) throw ValidationError("config: solver_tol must be > 0");
}

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    if (fp.is_absolute()) return p;
    return (fs::path(base_dir) / fp).lexically_normal().string();
}

} // namespace

ExperimentConfig config_from_json(const std::string& json_text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config: top level must be an object");

    ExperimentConfig cfg;
    if (!j.contains("feeder")) throw ParseError("config: missing field 'feeder'");
    cfg.feeder_path = resolve_path(base_dir, j.at("feeder").get<std::string>());
    cfg.output_dir = resolve_path(base_dir, j.value("output_dir", std::string("out")));
    cfg.horizon_s = j.value("horizon_s", 7200);
    cfg.start_of_day_s = j.value("start_of_day_s", 43200);

    if (j.contains("control")) {
        const auto& c = j.at("control");
        cfg.control.alpha = c.value("alpha", cfg.control.alpha);
        cfg.control.nu = c.value("nu", cfg.control.nu);
        cfg.control.epsilon = c.value("epsilon", cfg.control.epsilon);
        cfg.control.e_track = c.value("e_track_pu", cfg.control.e_track);
        cfg.control.v_min = c.value("v_min_pu", cfg.control.v_min);
        cfg.control.v_max = c.value("v_max_pu", cfg.control.v_max);
        cfg.control.c_p = c.value("c_p", cfg.control.c_p);
        cfg.control.c_q = c.value("c_q", cfg.control.c_q);
    }

    if (j.contains("delay")) {
        const auto& d = j.at("delay");
        cfg.delay.model.mean_ms = d.value("mean_ms", cfg.delay.model.mean_ms);
        cfg.delay.model.std_ms = d.value("std_ms", cfg.delay.model.std_ms);
        cfg.delay.model.mix = d.value("mix", cfg.delay.model.mix);
        cfg.delay.model.tail_rate_per_ms = d.value("tail_rate_per_ms", cfg.delay.model.tail_rate_per_ms);
        cfg.delay.model.seed = d.value("seed", cfg.delay.model.seed);
        if (d.contains("d_star_ms") && !d.at("d_star_ms").is_null())
            cfg.delay.d_star_ms = d.at("d_star_ms").get<double>();
        cfg.delay.loss_rate = d.value("loss_rate", cfg.delay.loss_rate);
        cfg.delay.calibration_samples = d.value("calibration_samples", cfg.delay.calibration_samples);
        if (d.contains("window_s")) {
            const auto& w = d.at("window_s");
            if (!w.is_array() || w.size() != 2)
                throw ParseError("config: delay.window_s must be [start, end]");
            cfg.delay.window_start_s = w[0].get<double>();
            cfg.delay.window_end_s = w[1].get<double>();
        }
        cfg.delay.direction = d.value("direction", cfg.delay.direction);
        cfg.delay.head_power_delayed = d.value("head_power_delayed", cfg.delay.head_power_delayed);
    }

    cfg.strategy = strategy_from_string(j.value("strategy", std::string("lstm")));

    if (j.contains("schedule")) cfg.schedule_seed = j.at("schedule").value("seed", cfg.schedule_seed);
    if (j.contains("pv")) {
        cfg.cloud_seed = j.at("pv").value("cloud_seed", cfg.cloud_seed);
        if (j.at("pv").contains("csv") && !j.at("pv").at("csv").is_null())
            cfg.pv_csv = resolve_path(base_dir, j.at("pv").at("csv").get<std::string>());
    }
    if (j.contains("load")) {
        cfg.load_seed = j.at("load").value("seed", cfg.load_seed);
        cfg.load_q_variation = j.at("load").value("q_variation", cfg.load_q_variation);
        if (j.at("load").contains("csv") && !j.at("load").at("csv").is_null())
            cfg.load_csv = resolve_path(base_dir, j.at("load").at("csv").get<std::string>());
    }

    if (j.contains("lstm")) {
        const auto& l = j.at("lstm");
        cfg.lstm.model_dir = resolve_path(base_dir, l.value("model_dir", cfg.lstm.model_dir));
        cfg.lstm.lookback = l.value("lookback", cfg.lstm.lookback);
        cfg.lstm.hidden_size = l.value("hidden_size", cfg.lstm.hidden_size);
        cfg.lstm.epochs = l.value("epochs", cfg.lstm.epochs);
        cfg.lstm.learning_rate = l.value("learning_rate", cfg.lstm.learning_rate);
        cfg.lstm.batch = l.value("batch", cfg.lstm.batch);
        cfg.lstm.train_episodes = l.value("train_episodes", cfg.lstm.train_episodes);
        cfg.lstm.train_seed = l.value("train_seed", cfg.lstm.train_seed);
        cfg.lstm.holdout_fraction = l.value("holdout_fraction", cfg.lstm.holdout_fraction);
    } else {
        cfg.lstm.model_dir = resolve_path(base_dir, cfg.lstm.model_dir);
    }

    if (j.contains("solver")) {
        cfg.solver_tol = j.at("solver").value("tol", cfg.solver_tol);
        cfg.solver_max_iter = j.at("solver").value("max_iter", cfg.solver_max_iter);
    }
    cfg.violation_tol_pu = j.value("violation_tol_pu", cfg.violation_tol_pu);
    cfg.settle_s = j.value("settle_s", cfg.settle_s);

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string dir = fs::path(path).parent_path().string();
    try {
        return config_from_json(ss.str(), dir.empty() ? "." : dir);
    } catch (const Error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace dergrid
