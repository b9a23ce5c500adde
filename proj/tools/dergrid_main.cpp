// Command-line front end. Talks to the core exclusively through the C API in
// dergrid.h, the same surface other language bindings would use.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dergrid.h"

namespace {

// Input problems (bad files, bad flags) exit 2; runtime failures exit 1.
int exit_code_for(dergrid_status st) {
    switch (st) {
        case DERGRID_OK: return 0;
        case DERGRID_ERR_PARSE:
        case DERGRID_ERR_VALIDATION:
        case DERGRID_ERR_IO:
        case DERGRID_ERR_NULL_ARGUMENT: return 2;
        default: return 1;
    }
}

int fail(dergrid_status st) {
    std::cerr << "error: " << dergrid_last_error() << "\n";
    return exit_code_for(st);
}

struct ConfigHandle {
    dergrid_config* ptr = nullptr;
    ~ConfigHandle() { dergrid_config_free(ptr); }
};

struct FeederHandle {
    dergrid_feeder* ptr = nullptr;
    ~FeederHandle() { dergrid_feeder_free(ptr); }
};

struct StringHandle {
    char* ptr = nullptr;
    ~StringHandle() { dergrid_string_free(ptr); }
};

int load_config(const std::string& path, std::uint64_t seed, bool seed_set,
                const std::string& out_dir, const std::string& strategy, ConfigHandle& handle) {
    if (dergrid_status st = dergrid_config_load(path.c_str(), &handle.ptr)) return fail(st);
    if (seed_set) dergrid_config_set_delay_seed(handle.ptr, seed);
    if (!out_dir.empty())
        if (dergrid_status st = dergrid_config_set_output_dir(handle.ptr, out_dir.c_str()))
            return fail(st);
    if (!strategy.empty())
        if (dergrid_status st = dergrid_config_set_strategy(handle.ptr, strategy.c_str()))
            return fail(st);
    return -1;  // keep going
}

std::string read_file_or_empty(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        std::exit(2);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dergrid - radial feeder DER control co-simulator"};
    app.require_subcommand(1);

    std::string config_path, feeder_path, out_dir, strategy, injections_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; },
            "override the communication delay seed");
    };

    // run ------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run a full closed-loop experiment");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--out", out_dir, "override the output directory");
    run->add_option("--strategy", strategy, "override the strategy (prev|skip|lstm)");
    add_seed(run);
    run->callback([&] {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed, seed_set, out_dir, strategy, cfg); rc >= 0)
            std::exit(rc);
        StringHandle metrics;
        if (dergrid_status st = dergrid_run(cfg.ptr, &metrics.ptr)) std::exit(fail(st));
        std::cout << metrics.ptr << "\n";
    });

    // sweep ----------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "tracking-error sensitivity sweep");
    std::vector<double> rates{0.01, 0.05, 0.10};
    std::string directions = "uplink";
    std::string strategies = "prev,skip,lstm";
    int seeds = 5;
    sweep->add_option("config", config_path, "experiment config JSON")->required();
    sweep->add_option("--rates", rates, "message loss rates")->delimiter(',');
    sweep->add_option("--direction", directions, "uplink | downlink | both");
    sweep->add_option("--strategies", strategies, "comma list of prev|skip|lstm");
    sweep->add_option("--seeds", seeds, "delay seeds per cell");
    sweep->add_option("--out", out_dir, "override the output directory");
    add_seed(sweep);
    sweep->callback([&] {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed, seed_set, out_dir, "", cfg); rc >= 0)
            std::exit(rc);
        StringHandle table;
        if (dergrid_status st = dergrid_sweep(cfg.ptr, rates.data(), static_cast<int>(rates.size()),
                                              directions.c_str(), strategies.c_str(), seeds,
                                              &table.ptr))
            std::exit(fail(st));
        std::cout << table.ptr;
    });

    // train ----------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train per-node voltage forecasters");
    train->add_option("config", config_path, "experiment config JSON")->required();
    train->callback([&] {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, 0, false, "", "", cfg); rc >= 0) std::exit(rc);
        StringHandle report;
        if (dergrid_status st = dergrid_train(cfg.ptr, &report.ptr)) std::exit(fail(st));
        std::cout << report.ptr << "\n";
    });

    // calibrate-delay --------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate-delay", "delay threshold d* for a loss rate");
    double rate = 0.01;
    long samples = 0;
    cal->add_option("config", config_path, "experiment config JSON")->required();
    cal->add_option("--rate", rate, "target fraction of late messages")->required();
    cal->add_option("--samples", samples, "Monte Carlo sample count");
    cal->callback([&] {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, 0, false, "", "", cfg); rc >= 0) std::exit(rc);
        double d_star = 0.0;
        if (dergrid_status st = dergrid_calibrate_delay(cfg.ptr, rate, samples, &d_star))
            std::exit(fail(st));
        std::printf("d_star_ms %.6f\n", d_star);
    });

    // powerflow --------------------------------------------------------------
    auto* pf = app.add_subcommand("powerflow", "solve one power flow on a feeder");
    double tol = 1e-8;
    int max_iter = 100;
    bool as_json = false;
    pf->add_option("feeder", feeder_path, "feeder definition JSON")->required();
    pf->add_option("injections", injections_path, "DER setpoints JSON (optional)");
    pf->add_option("--tol", tol, "convergence tolerance, p.u.");
    pf->add_option("--max-iter", max_iter, "sweep limit");
    pf->add_flag("--json", as_json, "print the raw solution document");
    pf->callback([&] {
        FeederHandle feeder;
        if (dergrid_status st = dergrid_feeder_load(feeder_path.c_str(), &feeder.ptr))
            std::exit(fail(st));
        const std::string setpoints = read_file_or_empty(injections_path);
        StringHandle solution;
        if (dergrid_status st = dergrid_solve_power_flow(
                feeder.ptr, setpoints.empty() ? nullptr : setpoints.c_str(), tol, max_iter,
                &solution.ptr))
            std::exit(fail(st));
        if (as_json) {
            std::cout << solution.ptr << "\n";
            return;
        }
        const auto j = nlohmann::json::parse(solution.ptr);
        std::printf("converged %s in %d sweeps (mismatch %.3e p.u.)\n",
                    j["converged"].get<bool>() ? "yes" : "no", j["iterations"].get<int>(),
                    j["mismatch_pu"].get<double>());
        std::printf("head power: %.6f kW, %.6f kvar\n", j["head_p_kw"].get<double>(),
                    j["head_q_kvar"].get<double>());
        std::printf("%6s %12s %12s\n", "node", "|V| [p.u.]", "angle [deg]");
        for (const auto& v : j["voltages"])
            std::printf("%6d %12.8f %12.6f\n", v["node"].get<int>(), v["v_pu"].get<double>(),
                        v["angle_deg"].get<double>());
        if (!j["converged"].get<bool>()) std::exit(1);
    });

    // linearize ---------------------------------------------------------------
    auto* lin = app.add_subcommand("linearize", "emit the sensitivity model bundle");
    bool numeric = false;
    double step = 1e-4;
    std::string model_out;
    lin->add_option("feeder", feeder_path, "feeder definition JSON")->required();
    lin->add_flag("--numeric", numeric, "finite-difference construction");
    lin->add_option("--step", step, "finite-difference step, p.u.");
    lin->add_option("--out", model_out, "write the bundle to a file instead of stdout");
    lin->callback([&] {
        FeederHandle feeder;
        if (dergrid_status st = dergrid_feeder_load(feeder_path.c_str(), &feeder.ptr))
            std::exit(fail(st));
        StringHandle model;
        if (dergrid_status st = dergrid_linearize(feeder.ptr, numeric ? 1 : 0, step, &model.ptr))
            std::exit(fail(st));
        if (model_out.empty()) {
            std::cout << model.ptr << "\n";
        } else {
            std::ofstream of(model_out);
            if (!of) {
                std::cerr << "error: cannot write " << model_out << "\n";
                std::exit(2);
            }
            of << model.ptr << "\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    return 0;
}
