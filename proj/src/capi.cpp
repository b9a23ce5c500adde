#include "dergrid.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "dergrid/harness.hpp"

using nlohmann::ordered_json;

struct dergrid_feeder {
    dergrid::FeederModel model;
};

struct dergrid_config {
    dergrid::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Runs the body, translating exceptions into status codes.
template <typename Fn>
dergrid_status guarded(Fn&& fn) {
    try {
        fn();
        return DERGRID_OK;
    } catch (const dergrid::ParseError& e) {
        g_last_error = e.what();
        return DERGRID_ERR_PARSE;
    } catch (const dergrid::IoError& e) {
        g_last_error = e.what();
        return DERGRID_ERR_IO;
    } catch (const dergrid::DivergenceError& e) {
        g_last_error = e.what();
        return DERGRID_ERR_DIVERGENCE;
    } catch (const dergrid::DimensionError& e) {
        g_last_error = e.what();
        return DERGRID_ERR_DIMENSION;
    } catch (const dergrid::ValidationError& e) {
        g_last_error = e.what();
        return DERGRID_ERR_VALIDATION;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DERGRID_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return DERGRID_ERR_INTERNAL;
    }
}

dergrid_status require(bool ok, const char* message) {
    if (ok) return DERGRID_OK;
    g_last_error = message;
    return DERGRID_ERR_NULL_ARGUMENT;
}

} // namespace

extern "C" {

const char* dergrid_version(void) { return "0.1.0"; }

const char* dergrid_last_error(void) { return g_last_error.c_str(); }

void dergrid_string_free(char* s) { std::free(s); }

dergrid_status dergrid_feeder_load(const char* path, dergrid_feeder** out) {
    if (auto st = require(path && out, "dergrid_feeder_load: null argument")) return st;
    return guarded([&] { *out = new dergrid_feeder{dergrid::load_feeder_file(path)}; });
}

dergrid_status dergrid_feeder_parse(const char* json_text, dergrid_feeder** out) {
    if (auto st = require(json_text && out, "dergrid_feeder_parse: null argument")) return st;
    return guarded([&] { *out = new dergrid_feeder{dergrid::parse_feeder(json_text)}; });
}

void dergrid_feeder_free(dergrid_feeder* feeder) { delete feeder; }

int dergrid_feeder_node_count(const dergrid_feeder* feeder) {
    return feeder ? feeder->model.n() : -1;
}

int dergrid_feeder_der_count(const dergrid_feeder* feeder) {
    return feeder ? static_cast<int>(feeder->model.der_slots.size()) : -1;
}

dergrid_status dergrid_solve_power_flow(const dergrid_feeder* feeder,
                                        const char* setpoints_json, double tol,
                                        int max_iter, char** solution_json_out) {
    if (auto st = require(feeder && solution_json_out,
                          "dergrid_solve_power_flow: null argument"))
        return st;
    return guarded([&] {
        const dergrid::FeederModel& f = feeder->model;

        std::vector<dergrid::DerDispatch> dispatch;
        if (setpoints_json && *setpoints_json) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(setpoints_json);
            } catch (const nlohmann::json::parse_error& e) {
                throw dergrid::ParseError(std::string("setpoints document: ") + e.what());
            }
            if (j.contains("der_setpoints")) {
                for (const auto& d : j.at("der_setpoints")) {
                    dergrid::DerDispatch dd;
                    dd.node = d.at("node").get<int>();
                    dd.p_pu = d.value("p_kw", 0.0) / f.base_kva;
                    dd.q_pu = d.value("q_kvar", 0.0) / f.base_kva;
                    dispatch.push_back(dd);
                }
            }
        }
        if (dispatch.empty())
            for (int slot : f.der_slots)
                dispatch.push_back({f.node_ids[slot], 0.0, 0.0});

        const auto injection = dergrid::net_injection(f, dispatch);
        const auto sol = dergrid::solve_power_flow(f, injection, tol > 0 ? tol : 1e-8,
                                                   max_iter > 0 ? max_iter : 100);

        ordered_json out;
        out["converged"] = sol.converged;
        out["iterations"] = sol.iterations;
        out["mismatch_pu"] = sol.mismatch;
        out["head_p_kw"] = sol.head_power.real() * f.base_kva;
        out["head_q_kvar"] = sol.head_power.imag() * f.base_kva;
        ordered_json volts = ordered_json::array();
        for (int slot = 0; slot <= f.n(); ++slot) {
            ordered_json v;
            v["node"] = f.node_ids[slot];
            v["v_pu"] = std::abs(sol.voltage[slot]);
            v["angle_deg"] = std::arg(sol.voltage[slot]) * 180.0 / M_PI;
            volts.push_back(v);
        }
        out["voltages"] = volts;
        *solution_json_out = dup_string(out.dump(2));
    });
}

dergrid_status dergrid_linearize(const dergrid_feeder* feeder, int numeric, double step,
                                 char** model_json_out) {
    if (auto st = require(feeder && model_json_out, "dergrid_linearize: null argument"))
        return st;
    return guarded([&] {
        const dergrid::FeederModel& f = feeder->model;
        dergrid::LinearGridModel model;
        if (numeric) {
            std::vector<dergrid::DerDispatch> zeros;
            for (int slot : f.der_slots) zeros.push_back({f.node_ids[slot], 0.0, 0.0});
            const auto injection = dergrid::net_injection(f, zeros);
            model = dergrid::linearize_numeric(f, injection, step > 0 ? step : 1e-4);
        } else {
            model = dergrid::linearize_analytic(f);
        }
        *model_json_out = dup_string(dergrid::linear_model_to_json(model));
    });
}

dergrid_status dergrid_config_load(const char* path, dergrid_config** out) {
    if (auto st = require(path && out, "dergrid_config_load: null argument")) return st;
    return guarded([&] { *out = new dergrid_config{dergrid::load_config_file(path)}; });
}

void dergrid_config_free(dergrid_config* config) { delete config; }

dergrid_status dergrid_config_set_delay_seed(dergrid_config* config, uint64_t seed) {
    if (auto st = require(config != nullptr, "dergrid_config_set_delay_seed: null argument"))
        return st;
    config->cfg.delay.model.seed = seed;
    return DERGRID_OK;
}

dergrid_status dergrid_config_set_output_dir(dergrid_config* config, const char* dir) {
    if (auto st = require(config && dir, "dergrid_config_set_output_dir: null argument"))
        return st;
    config->cfg.output_dir = dir;
    return DERGRID_OK;
}

dergrid_status dergrid_config_set_strategy(dergrid_config* config, const char* strategy) {
    if (auto st = require(config && strategy, "dergrid_config_set_strategy: null argument"))
        return st;
    return guarded([&] { config->cfg.strategy = dergrid::strategy_from_string(strategy); });
}

dergrid_status dergrid_run(const dergrid_config* config, char** metrics_json_out) {
    if (auto st = require(config && metrics_json_out, "dergrid_run: null argument")) return st;
    return guarded([&] {
        const dergrid::RunOutputs out = dergrid::run_experiment(config->cfg);
        *metrics_json_out = dup_string(dergrid::metrics_to_json(out.metrics));
    });
}

dergrid_status dergrid_sweep(const dergrid_config* config, const double* rates, int n_rates,
                             const char* directions_csv, const char* strategies_csv,
                             int seeds, char** table_csv_out) {
    if (auto st = require(config && rates && n_rates > 0 && table_csv_out,
                          "dergrid_sweep: null argument"))
        return st;
    return guarded([&] {
        auto split = [](const std::string& csv) {
            std::vector<std::string> parts;
            std::stringstream ss(csv);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) parts.push_back(item);
            }
            return parts;
        };

        std::vector<std::string> directions;
        for (const auto& d : split(directions_csv ? directions_csv : "uplink")) {
            if (d == "both") {
                directions.push_back("uplink");
                directions.push_back("downlink");
            } else if (d == "uplink" || d == "downlink") {
                directions.push_back(d);
            } else {
                throw dergrid::ValidationError("sweep: unknown direction '" + d + "'");
            }
        }

        std::vector<dergrid::Strategy> strategies;
        for (const auto& s : split(strategies_csv ? strategies_csv : "prev,skip,lstm"))
            strategies.push_back(dergrid::strategy_from_string(s));

        const std::vector<double> rate_vec(rates, rates + n_rates);
        const auto result = dergrid::run_sensitivity_sweep(config->cfg, rate_vec, directions,
                                                           strategies, seeds > 0 ? seeds : 1);
        dergrid::write_sweep_outputs(config->cfg, result);

        std::ostringstream table;
        table << "direction,strategy,loss_rate,tracking_rmse_kw\n";
        for (const auto& c : result.averaged)
            table << c.direction << ',' << dergrid::to_string(c.strategy) << ','
                  << dergrid::format_g17(c.rate) << ',' << dergrid::format_g17(c.tracking_rmse_kw)
                  << '\n';
        *table_csv_out = dup_string(table.str());
    });
}

dergrid_status dergrid_train(const dergrid_config* config, char** report_json_out) {
    if (auto st = require(config && report_json_out, "dergrid_train: null argument")) return st;
    return guarded([&] {
        const dergrid::TrainReport report = dergrid::train_forecasters(config->cfg);
        ordered_json j = ordered_json::array();
        for (const auto& nr : report.nodes) {
            ordered_json e;
            e["node"] = nr.node;
            e["final_train_rmse"] = nr.final_train_rmse;
            e["holdout_rmse"] = nr.holdout_rmse;
            e["model_path"] = nr.model_path;
            e["diverged"] = nr.diverged;
            j.push_back(e);
        }
        *report_json_out = dup_string(j.dump(2));
    });
}

dergrid_status dergrid_calibrate_delay(const dergrid_config* config, double rate,
                                       long samples, double* d_star_ms_out) {
    if (auto st = require(config && d_star_ms_out, "dergrid_calibrate_delay: null argument"))
        return st;
    return guarded([&] {
        const long n = samples > 0 ? samples : config->cfg.delay.calibration_samples;
        *d_star_ms_out = dergrid::calibrate_threshold(config->cfg.delay.model, rate, n);
    });
}

} // extern "C"
