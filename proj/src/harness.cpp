#include "dergrid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dergrid/svg.hpp"

namespace dergrid {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ScenarioData build_scenario(const ExperimentConfig& cfg) {
    cfg.validate();

    ScenarioData s;
    s.feeder = load_feeder_file(cfg.feeder_path);
    s.model = linearize_analytic(s.feeder);

    const int horizon = cfg.horizon_s;
    const int day_end = cfg.start_of_day_s + horizon;

    // PV availability per DER; one shared cloud field over the feeder.
    if (cfg.pv_csv) {
        const Profile p = load_profile_csv(*cfg.pv_csv, true);
        if (p.length_s() < horizon)
            throw ValidationError("pv profile shorter than horizon: " + *cfg.pv_csv);
        for (std::size_t i = 0; i < s.feeder.der_slots.size(); ++i) s.pv_kw.push_back(p);
    } else {
        for (int slot : s.feeder.der_slots) {
            const double cap_kw = s.feeder.der_capacity_pu.at(slot) * s.feeder.base_kva;
            const Profile day = generate_pv_profile(day_end, cap_kw, cfg.cloud_seed);
            Profile sliced;
            sliced.samples.assign(day.samples.begin() + cfg.start_of_day_s, day.samples.end());
            s.pv_kw.push_back(std::move(sliced));
        }
    }

    if (cfg.load_csv) {
        s.load_scale = load_profile_csv(*cfg.load_csv, true);
        if (s.load_scale.length_s() < horizon)
            throw ValidationError("load profile shorter than horizon: " + *cfg.load_csv);
    } else {
        s.load_scale = generate_load_scaling(horizon, cfg.load_seed);
    }

    // Second-scale reactive churn, independent per loaded node.
    s.q_variation.resize(s.feeder.n() + 1);
    for (int slot = 1; slot <= s.feeder.n(); ++slot) {
        if (s.feeder.load[slot].imag() != 0.0)
            s.q_variation[slot] = generate_fast_variation(horizon, cfg.load_seed + 7919ull * slot);
    }

    // Feasible head-power band: everything served from the head vs. every DER
    // at full availability.
    double load_p_total = 0.0;
    for (int slot = 1; slot <= s.feeder.n(); ++slot) load_p_total += s.feeder.load[slot].real();
    s.env_lo.assign(horizon, 0.0);
    s.env_hi.assign(horizon, 0.0);
    for (int t = 0; t < horizon; ++t) {
        const double load_t = load_p_total * s.load_scale.at(t);
        double pv_t = 0.0;
        for (const auto& p : s.pv_kw) pv_t += p.at(t) / s.feeder.base_kva;
        s.env_hi[t] = load_t;
        s.env_lo[t] = load_t - pv_t;
    }

    s.schedule = generate_setpoint_schedule(horizon, s.env_lo, s.env_hi, cfg.schedule_seed);

    s.d_star_ms = cfg.delay.d_star_ms
                      ? *cfg.delay.d_star_ms
                      : calibrate_threshold(cfg.delay.model, cfg.delay.loss_rate,
                                            cfg.delay.calibration_samples);
    return s;
}

SetpointSchedule reschedule(const ScenarioData& scenario, std::uint64_t seed) {
    return generate_setpoint_schedule(static_cast<int>(scenario.env_lo.size()),
                                      scenario.env_lo, scenario.env_hi, seed);
}

namespace {

struct IterationContext {
    Strategy strategy;
    std::string direction;
    double d_star_ms;
    const SetpointSchedule* schedule;
    bool collect_true_voltages = false;
};

// Start of the setpoint level `t` falls into, or a negative value when the
// segment is never steady (ramps).
double level_start_at(const SetpointSchedule& sched, double t) {
    for (const auto& seg : sched.segments) {
        if (t < seg.start_s || t >= seg.end_s) continue;
        switch (seg.kind) {
            case ScheduleSegment::Kind::Constant: return seg.start_s;
            case ScheduleSegment::Kind::Ramp: return -1.0;
            case ScheduleSegment::Kind::StepTrain:
                return seg.start_s + std::floor((t - seg.start_s) / seg.step_s) * seg.step_s;
        }
    }
    return -1.0;
}

void iterate(SimulationState& state, const ScenarioData& scen, const ExperimentConfig& cfg,
             const IterationContext& ctx, DelaySampler& sampler,
             const ForecastRegistry* registry, RunOutputs& out,
             const std::function<void(long, const char*)>& on_event) {
    const FeederModel& feeder = scen.feeder;
    const long t = state.t_k;
    const auto ti = static_cast<int>(t);
    const double p0_set = ctx.schedule->value_at(static_cast<double>(t));
    const bool in_window = static_cast<double>(t) >= cfg.delay.window_start_s &&
                           static_cast<double>(t) < cfg.delay.window_end_s;
    const bool uplink_active = in_window && ctx.direction == "uplink";
    const bool downlink_active = in_window && ctx.direction == "downlink";
    auto emit = [&](const char* ev) { if (on_event) on_event(t, ev); };

    // (1) The physical grid answers the current dispatch: Step 1 feedback.
    std::vector<Complex> injection(feeder.n() + 1, Complex(0.0, 0.0));
    const double scale = scen.load_scale.at(ti);
    for (int slot = 1; slot <= feeder.n(); ++slot) {
        double p_load = feeder.load[slot].real() * scale;
        double q_load = feeder.load[slot].imag() * scale;
        if (!scen.q_variation[slot].samples.empty())
            q_load *= 1.0 + cfg.load_q_variation * scen.q_variation[slot].at(ti);
        injection[slot] = Complex(-p_load, -q_load);
    }
    for (std::size_t i = 0; i < feeder.der_slots.size(); ++i)
        injection[feeder.der_slots[i]] += Complex(state.setpoints[i].p, state.setpoints[i].q);

    const PowerFlowSolution sol =
        solve_power_flow(feeder, injection, cfg.solver_tol, cfg.solver_max_iter);
    if (!sol.converged)
        throw DivergenceError("power flow diverged at iteration " + std::to_string(t));

    const std::size_t m = feeder.measured_slots.size();
    Vec v_true(m);
    for (std::size_t k = 0; k < m; ++k)
        v_true[k] = std::abs(sol.voltage[feeder.measured_slots[k]]);
    const double p0_true = sol.head_power.real();
    emit("measure");

    if (ctx.collect_true_voltages)
        for (std::size_t k = 0; k < m; ++k) out.true_voltages[k].push_back(v_true[k]);

    // (2) Uplink arrival bookkeeping against the deadline d*.
    std::vector<NodeId> measured_ids(m);
    for (std::size_t k = 0; k < m; ++k) measured_ids[k] = feeder.node_ids[feeder.measured_slots[k]];
    std::vector<MessageRecord> records =
        classify_arrivals(t, measured_ids, sampler, ctx.d_star_ms, uplink_active);
    emit("validate");

    // (3) Resolve every late voltage per the active strategy.
    Vec v_used = v_true;
    std::vector<bool> mask(m, true);
    long late_this_iter = 0;
    for (std::size_t k = 0; k < m; ++k) {
        MessageRecord& rec = records[k];
        if (rec.on_time) {
            state.last_on_time[k] = v_true[k];
            state.last_on_time_age[k] = 0;
            state.history[k].push_back(v_true[k]);
            continue;
        }
        ++late_this_iter;
        ++state.last_on_time_age[k];
        if (state.history[k].empty()) {
            // Nothing to stand in for the measurement yet; first iterations
            // count as received.
            rec.action = "bootstrap";
            v_used[k] = v_true[k];
            state.history[k].push_back(v_true[k]);
            continue;
        }
        const Resolution r = resolve_missing(ctx.strategy, rec.node, state.history[k],
                                             registry ? *registry : ForecastRegistry{});
        if (r.kind == Resolution::Kind::Skip) {
            mask[k] = false;
            rec.action = "skip";
            state.history[k].push_back(state.history[k].back());
            v_used[k] = state.last_on_time[k];
        } else {
            v_used[k] = r.value;
            state.history[k].push_back(r.value);
            if (ctx.strategy == Strategy::LstmForecast && !r.fallback_used) {
                rec.action = "lstm";
                const double err = r.value - v_true[k];
                out.metrics.forecast_samples += 1;
                // Stash squared error; finalized into an RMSE at the end.
                out.metrics.forecast_rmse_pu =
                    out.metrics.forecast_rmse_pu.value_or(0.0) + err * err;
            } else if (r.fallback_used) {
                rec.action = "lstm_fallback_prev";
                out.metrics.lstm_fallback_count += 1;
            } else {
                rec.action = "prev";
            }
        }
    }
    emit("estimate");

    // Head-power message (always on time unless explicitly enabled).
    double p0_used = p0_true;
    bool track_update = true;
    if (cfg.delay.head_power_delayed && ctx.direction != "none") {
        MessageRecord rec;
        rec.kind = MessageKind::UplinkHeadPower;
        rec.node = 0;
        rec.issued_at = t;
        rec.delay_ms = sampler.sample();
        rec.on_time = !in_window || rec.delay_ms <= ctx.d_star_ms;
        if (!rec.on_time) {
            ++late_this_iter;
            if (ctx.strategy == Strategy::SkipUpdate) {
                track_update = false;
                rec.action = "skip";
            } else {
                p0_used = state.last_p0;
                rec.action = "prev";
            }
        }
        records.push_back(rec);
    }
    state.last_p0 = p0_true;

    // (4) Dual ascent with the resolved measurements; skipped nodes frozen.
    DualState next = state.duals;
    {
        DualState updated = dual_update(state.duals, v_used, p0_used, p0_set, cfg.control,
                                        mask);
        if (!track_update) {
            updated.lambda = state.duals.lambda;
            updated.zeta = state.duals.zeta;
        }
        next = std::move(updated);
    }
    emit("dual_update");

    // (5) Broadcast d^{t_{k+1}} to the DER agents.
    std::vector<bool> agent_updates(feeder.der_slots.size(), true);
    if (downlink_active) {
        for (std::size_t i = 0; i < feeder.der_slots.size(); ++i) {
            MessageRecord rec;
            rec.kind = MessageKind::DownlinkDuals;
            rec.node = feeder.node_ids[feeder.der_slots[i]];
            rec.issued_at = t;
            rec.delay_ms = sampler.sample();
            rec.on_time = rec.delay_ms <= ctx.d_star_ms;
            if (rec.on_time) {
                state.agent_duals[i] = next;
            } else {
                ++late_this_iter;
                if (ctx.strategy == Strategy::SkipUpdate) {
                    agent_updates[i] = false;  // hold the dispatch this round
                    rec.action = "skip";
                } else {
                    rec.action = "prev";  // stale duals stay in force
                }
            }
            records.push_back(rec);
        }
    } else {
        for (auto& ad : state.agent_duals) ad = next;
    }
    emit("broadcast");

    // (6) Projected gradient step at every DER agent.
    for (std::size_t i = 0; i < feeder.der_slots.size(); ++i) {
        if (!agent_updates[i]) continue;
        const int slot = feeder.der_slots[i];
        DerCapability cap;
        cap.p_av = scen.pv_kw[i].at(ti) / feeder.base_kva;
        cap.s_max = feeder.der_capacity_pu.at(slot);
        const auto grad = lagrangian_gradient(state.setpoints[i], cap, state.agent_duals[i],
                                              scen.model, slot, feeder.measured_slots,
                                              cfg.control);
        state.setpoints[i] = primal_update(state.setpoints[i], cap, grad, cfg.control);
    }
    emit("primal_update");
    emit("dispatch");

    // (7) Metrics and the per-iteration record.
    const double err_pu = std::abs(p0_true - p0_set);
    double v_lo = 1e300, v_hi = -1e300;
    for (std::size_t k = 0; k < m; ++k) {
        v_lo = std::min(v_lo, v_true[k]);
        v_hi = std::max(v_hi, v_true[k]);
        const double excursion =
            std::max(cfg.control.v_min - v_true[k], v_true[k] - cfg.control.v_max);
        out.metrics.max_voltage_excursion_pu =
            std::max(out.metrics.max_voltage_excursion_pu, excursion);
        if (excursion > cfg.violation_tol_pu) {
            out.metrics.voltage_violation_count += 1;
            if (t >= 300) out.metrics.voltage_violations_after_300s += 1;
        }
    }
    if (m == 0) { v_lo = 0.0; v_hi = 0.0; }

    ResultRow row;
    row.t_s = t;
    row.p0_kw = p0_true * feeder.base_kva;
    row.p0_set_kw = p0_set * feeder.base_kva;
    row.tracking_err_kw = err_pu * feeder.base_kva;
    row.v_min_pu = v_lo;
    row.v_max_pu = v_hi;
    row.dual_norm = next.norm();
    row.late_msgs = late_this_iter;
    out.rows.push_back(row);

    out.metrics.tracking_rmse_pu += err_pu * err_pu;  // finalized later
    const double lvl = level_start_at(*ctx.schedule, static_cast<double>(t));
    if (lvl >= 0.0 && static_cast<double>(t) - lvl >= cfg.settle_s && t >= 300)
        out.metrics.steady_max_tracking_err_pu =
            std::max(out.metrics.steady_max_tracking_err_pu, err_pu);

    for (const auto& rec : records) {
        if (!rec.on_time) out.metrics.late_message_count += 1;
        out.metrics.total_message_count += 1;
    }
    out.messages.insert(out.messages.end(), records.begin(), records.end());
    emit("metrics");

    // (8) Advance the iteration clock.
    state.duals = next;
    state.t_k += 1;
}

} // namespace

void run_iteration(SimulationState& state, const ScenarioData& scenario,
                   const ExperimentConfig& cfg, Strategy strategy,
                   const std::string& direction, DelaySampler& sampler,
                   const ForecastRegistry* registry, RunOutputs& out,
                   const std::function<void(long, const char*)>& on_event) {
    IterationContext ctx;
    ctx.strategy = strategy;
    ctx.direction = direction;
    ctx.d_star_ms = scenario.d_star_ms;
    ctx.schedule = &scenario.schedule;
    ctx.collect_true_voltages = !out.true_voltages.empty();
    iterate(state, scenario, cfg, ctx, sampler, registry, out, on_event);
}

RunOutputs simulate(const ExperimentConfig& cfg, const ScenarioData& scenario,
                    const ForecastRegistry* registry, const RunOverrides& overrides) {
    const Strategy strategy = overrides.strategy.value_or(cfg.strategy);
    const std::string direction = overrides.direction.value_or(cfg.delay.direction);

    IterationContext ctx;
    ctx.strategy = strategy;
    ctx.direction = direction;
    ctx.schedule = overrides.schedule ? overrides.schedule : &scenario.schedule;
    ctx.collect_true_voltages = overrides.collect_true_voltages;
    ctx.d_star_ms = overrides.loss_rate
                        ? calibrate_threshold(cfg.delay.model, *overrides.loss_rate,
                                              cfg.delay.calibration_samples)
                        : scenario.d_star_ms;

    DelayModel delay_model = cfg.delay.model;
    if (overrides.delay_seed) delay_model.seed = *overrides.delay_seed;
    DelaySampler sampler(delay_model);

    const std::size_t m = scenario.feeder.measured_slots.size();
    SimulationState state;
    state.duals = DualState(m);
    state.setpoints.assign(scenario.feeder.der_slots.size(), DerSetpoint{});
    state.agent_duals.assign(scenario.feeder.der_slots.size(), DualState(m));
    state.history.assign(m, {});
    state.last_on_time.assign(m, scenario.feeder.head_voltage_pu);
    state.last_on_time_age.assign(m, 0);

    RunOutputs out;
    out.rows.reserve(cfg.horizon_s);
    if (ctx.collect_true_voltages) {
        out.true_voltages.assign(m, {});
        for (auto& v : out.true_voltages) v.reserve(cfg.horizon_s);
    }

    for (long t = 0; t < cfg.horizon_s; ++t)
        iterate(state, scenario, cfg, ctx, sampler, registry, out, overrides.on_event);

    // Finalize accumulated metrics.
    out.metrics.iterations = cfg.horizon_s;
    out.metrics.tracking_rmse_pu = std::sqrt(out.metrics.tracking_rmse_pu / cfg.horizon_s);
    out.metrics.tracking_rmse_kw = out.metrics.tracking_rmse_pu * scenario.feeder.base_kva;
    if (out.metrics.forecast_rmse_pu)
        out.metrics.forecast_rmse_pu =
            std::sqrt(*out.metrics.forecast_rmse_pu / out.metrics.forecast_samples);
    return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream of(path);
    if (!of) throw IoError("cannot write results file: " + path);
    of << "t_s,p0_kw,p0_set_kw,tracking_err_kw,v_min_pu,v_max_pu,dual_norm,late_msgs\n";
    for (const auto& r : rows) {
        of << r.t_s << ',' << format_g17(r.p0_kw) << ',' << format_g17(r.p0_set_kw) << ','
           << format_g17(r.tracking_err_kw) << ',' << format_g17(r.v_min_pu) << ','
           << format_g17(r.v_max_pu) << ',' << format_g17(r.dual_norm) << ',' << r.late_msgs
           << '\n';
    }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        ResultRow r;
        auto next = [&]() {
            if (!std::getline(ss, cell, ',')) throw ParseError(path + ": short row");
            return cell;
        };
        r.t_s = std::stol(next());
        r.p0_kw = std::stod(next());
        r.p0_set_kw = std::stod(next());
        r.tracking_err_kw = std::stod(next());
        r.v_min_pu = std::stod(next());
        r.v_max_pu = std::stod(next());
        r.dual_norm = std::stod(next());
        r.late_msgs = std::stol(next());
        rows.push_back(r);
    }
    return rows;
}

void write_messages_csv(const std::vector<MessageRecord>& messages, const std::string& path) {
    std::ofstream of(path);
    if (!of) throw IoError("cannot write message log: " + path);
    of << "iteration,kind,node,delay_ms,on_time,strategy_action\n";
    for (const auto& rec : messages) {
        of << rec.issued_at << ',' << to_string(rec.kind) << ',' << rec.node << ','
           << format_g17(rec.delay_ms) << ',' << (rec.on_time ? 1 : 0) << ',' << rec.action
           << '\n';
    }
}

std::string metrics_to_json(const RunMetrics& m) {
    ordered_json j;
    j["iterations"] = m.iterations;
    j["tracking_rmse_kw"] = m.tracking_rmse_kw;
    j["tracking_rmse_pu"] = m.tracking_rmse_pu;
    j["steady_max_tracking_err_pu"] = m.steady_max_tracking_err_pu;
    j["voltage_violation_count"] = m.voltage_violation_count;
    j["voltage_violations_after_300s"] = m.voltage_violations_after_300s;
    j["max_voltage_excursion_pu"] = m.max_voltage_excursion_pu;
    if (m.forecast_rmse_pu) j["forecast_rmse_pu"] = *m.forecast_rmse_pu;
    else j["forecast_rmse_pu"] = nullptr;
    j["forecast_samples"] = m.forecast_samples;
    j["lstm_fallback_count"] = m.lstm_fallback_count;
    j["late_message_count"] = m.late_message_count;
    j["total_message_count"] = m.total_message_count;
    return j.dump(2);
}

namespace {

void write_run_plots(const ExperimentConfig& cfg, const RunOutputs& out,
                     const std::string& dir) {
    std::vector<double> ts, p0, p0set, vlo, vhi;
    ts.reserve(out.rows.size());
    for (const auto& r : out.rows) {
        ts.push_back(static_cast<double>(r.t_s));
        p0.push_back(r.p0_kw);
        p0set.push_back(r.p0_set_kw);
        vlo.push_back(r.v_min_pu);
        vhi.push_back(r.v_max_pu);
    }

    SvgChart tracking("Feeder head power vs setpoint", "time [s]", "P0 [kW]");
    tracking.add_series("P0 setpoint", ts, p0set, "#d62728");
    tracking.add_series("P0 measured", ts, p0, "#1f77b4");
    tracking.save(dir + "/plot_tracking.svg");

    SvgChart voltage("Measured voltage band", "time [s]", "|V| [p.u.]");
    voltage.add_series("max measured", ts, vhi, "#ff7f0e");
    voltage.add_series("min measured", ts, vlo, "#1f77b4");
    voltage.add_hline(cfg.control.v_min, "V min", "#d62728");
    voltage.add_hline(cfg.control.v_max, "V max", "#d62728");
    voltage.save(dir + "/plot_voltage.svg");
}

} // namespace

RunOutputs run_experiment(const ExperimentConfig& cfg) {
    const ScenarioData scenario = build_scenario(cfg);

    ForecastRegistry registry;
    const ForecastRegistry* reg_ptr = nullptr;
    if (cfg.strategy == Strategy::LstmForecast && cfg.delay.direction != "none") {
        registry = load_registry(cfg, scenario.feeder);
        reg_ptr = &registry;
    }

    fs::create_directories(cfg.output_dir);
    RunOutputs out = simulate(cfg, scenario, reg_ptr);
    write_results_csv(out.rows, cfg.output_dir + "/results.csv");
    write_messages_csv(out.messages, cfg.output_dir + "/messages.csv");
    std::ofstream mj(cfg.output_dir + "/metrics.json");
    if (!mj) throw IoError("cannot write metrics file: " + cfg.output_dir + "/metrics.json");
    mj << metrics_to_json(out.metrics) << "\n";
    write_run_plots(cfg, out, cfg.output_dir);
    return out;
}

SweepResult run_sensitivity_sweep(const ExperimentConfig& cfg, const std::vector<double>& rates,
                                  const std::vector<std::string>& directions,
                                  const std::vector<Strategy>& strategies, int seeds) {
    for (double r : rates)
        if (r < 0.0 || r >= 1.0)
            throw ValidationError("sweep: loss rates must lie in [0,1)");
    if (seeds < 1) throw ValidationError("sweep: need at least one seed");

    const ScenarioData scenario = build_scenario(cfg);
    ForecastRegistry registry;
    const ForecastRegistry* reg_ptr = nullptr;
    if (std::find(strategies.begin(), strategies.end(), Strategy::LstmForecast) !=
        strategies.end()) {
        registry = load_registry(cfg, scenario.feeder);
        reg_ptr = &registry;
    }

    SweepResult result;
    for (const auto& direction : directions) {
        for (Strategy strategy : strategies) {
            for (double rate : rates) {
                double mean = 0.0;
                for (int k = 0; k < seeds; ++k) {
                    RunOverrides ov;
                    ov.strategy = strategy;
                    ov.direction = rate == 0.0 ? "none" : direction;
                    if (rate > 0.0) ov.loss_rate = rate;
                    ov.delay_seed = cfg.delay.model.seed + static_cast<std::uint64_t>(k);
                    const RunOutputs out = simulate(cfg, scenario, reg_ptr, ov);
                    SweepCell cell{direction, strategy, rate,
                                   *ov.delay_seed, out.metrics.tracking_rmse_kw};
                    result.cells.push_back(cell);
                    mean += out.metrics.tracking_rmse_kw;
                }
                result.averaged.push_back({direction, strategy, rate, 0, mean / seeds});
            }
        }
    }
    return result;
}

void write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& result) {
    fs::create_directories(cfg.output_dir);
    const std::string csv_path = cfg.output_dir + "/sweep.csv";
    std::ofstream of(csv_path);
    if (!of) throw IoError("cannot write sweep table: " + csv_path);
    of << "direction,strategy,loss_rate,seed,tracking_rmse_kw\n";
    for (const auto& c : result.cells)
        of << c.direction << ',' << to_string(c.strategy) << ',' << format_g17(c.rate) << ','
           << c.seed << ',' << format_g17(c.tracking_rmse_kw) << '\n';
    of << "# seed-averaged\n";
    for (const auto& c : result.averaged)
        of << c.direction << ',' << to_string(c.strategy) << ',' << format_g17(c.rate) << ','
           << "mean," << format_g17(c.tracking_rmse_kw) << '\n';

    SvgChart chart("Tracking error vs message loss rate", "loss rate", "tracking RMSE [kW]");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> lines;
    for (const auto& c : result.averaged) {
        auto& line = lines[c.direction + " / " + to_string(c.strategy)];
        line.first.push_back(c.rate);
        line.second.push_back(c.tracking_rmse_kw);
    }
    for (auto& [name, xy] : lines) chart.add_series(name, xy.first, xy.second);
    chart.save(cfg.output_dir + "/sweep.svg");
}

TrainReport train_forecasters(const ExperimentConfig& cfg) {
    const ScenarioData scenario = build_scenario(cfg);
    const std::size_t m = scenario.feeder.measured_slots.size();

    // Ideal-network episodes under fresh random setpoint curves supply the
    // training voltage traces.
    std::vector<std::vector<double>> series(m);
    for (int ep = 0; ep < cfg.lstm.train_episodes; ++ep) {
        const SetpointSchedule episode_schedule =
            reschedule(scenario, cfg.lstm.train_seed + 7919ull * ep);
        RunOverrides ov;
        ov.direction = "none";
        ov.collect_true_voltages = true;
        ov.schedule = &episode_schedule;
        const RunOutputs out = simulate(cfg, scenario, nullptr, ov);
        for (std::size_t k = 0; k < m; ++k)
            series[k].insert(series[k].end(), out.true_voltages[k].begin(),
                             out.true_voltages[k].end());
    }

    fs::create_directories(cfg.lstm.model_dir);
    TrainReport report;
    for (std::size_t k = 0; k < m; ++k) {
        const NodeId node = scenario.feeder.node_ids[scenario.feeder.measured_slots[k]];
        NodeTrainReport nr;
        nr.node = node;
        try {
            const auto len = static_cast<long>(series[k].size());
            const auto split = static_cast<long>(
                std::floor(static_cast<double>(len) * (1.0 - cfg.lstm.holdout_fraction)));
            if (split <= cfg.lstm.lookback + 1)
                throw ValidationError("training series too short");

            LstmNetwork net;
            net.cell = LstmCell(cfg.lstm.hidden_size, 1);
            net.output_weights.assign(cfg.lstm.hidden_size, 0.0);
            net.lookback = cfg.lstm.lookback;
            net.v_base = 1.0;  // traces are already per-unit
            init_weights(net, cfg.lstm.train_seed + 31ull * static_cast<std::uint64_t>(node));

            TrainConfig tc;
            tc.epochs = cfg.lstm.epochs;
            tc.learning_rate = cfg.lstm.learning_rate;
            tc.batch = cfg.lstm.batch;
            tc.seed = cfg.lstm.train_seed;
            const TrainResult tr =
                train(net, std::span<const double>(series[k].data(), split), tc);
            nr.final_train_rmse = tr.loss_history.back();

            // Held-out one-step error over the tail the optimizer never saw.
            double sse = 0.0;
            long count = 0;
            for (long t0 = split - net.lookback; t0 + net.lookback < len; ++t0) {
                const double pred = predict_voltage(
                    net, std::span<const double>(series[k].data() + t0, net.lookback));
                const double e = pred - series[k][t0 + net.lookback];
                sse += e * e;
                ++count;
            }
            nr.holdout_rmse = count > 0 ? std::sqrt(sse / count) : 0.0;

            nr.model_path = cfg.lstm.model_dir + "/model_node_" + std::to_string(node) + ".json";
            save_lstm_file(net, nr.model_path);
        } catch (const Error& e) {
            nr.diverged = true;
            nr.error = e.what();
        }
        report.nodes.push_back(std::move(nr));
    }

    ordered_json j = ordered_json::array();
    for (const auto& nr : report.nodes) {
        ordered_json e;
        e["node"] = nr.node;
        e["final_train_rmse"] = nr.final_train_rmse;
        e["holdout_rmse"] = nr.holdout_rmse;
        e["model_path"] = nr.model_path;
        e["diverged"] = nr.diverged;
        if (!nr.error.empty()) e["error"] = nr.error;
        j.push_back(e);
    }
    std::ofstream rf(cfg.lstm.model_dir + "/training_report.json");
    if (!rf) throw IoError("cannot write training report under " + cfg.lstm.model_dir);
    rf << j.dump(2) << "\n";
    return report;
}

ForecastRegistry load_registry(const ExperimentConfig& cfg, const FeederModel& feeder) {
    ForecastRegistry registry;
    for (int slot : feeder.measured_slots) {
        const NodeId node = feeder.node_ids[slot];
        const std::string path =
            cfg.lstm.model_dir + "/model_node_" + std::to_string(node) + ".json";
        if (!fs::exists(path))
            throw IoError("missing forecaster model for node " + std::to_string(node) + ": " +
                          path + " (run the train command first)");
        registry.put(node, load_lstm_file(path));
    }
    return registry;
}

} // namespace dergrid
