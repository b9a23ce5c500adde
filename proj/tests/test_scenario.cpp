#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dergrid/scenario.hpp"

using namespace dergrid;

namespace {

std::string data_path(const char* name) { return std::string(DERGRID_DATA_DIR "/") + name; }

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

SetpointSchedule flat_env_schedule(std::uint64_t seed, int horizon = 7200) {
    const Vec lo(horizon, 0.2), hi(horizon, 1.0);
    return generate_setpoint_schedule(horizon, lo, hi, seed);
}

} // namespace

TEST_CASE("setpoint schedule tiles the horizon and is single-valued") {
    const SetpointSchedule s = flat_env_schedule(7);
    s.validate();
    for (int t = 0; t < 7200; ++t) {
        const double v = s.value_at(t);
        CHECK(std::isfinite(v));
        CHECK(v >= 0.2);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(s.value_at(7200.0), ValidationError);
    CHECK_THROWS_AS(s.value_at(-1.0), ValidationError);
}

TEST_CASE("setpoint schedule structure: constants, ramps, step trains") {
    const SetpointSchedule s = flat_env_schedule(7);

    SUBCASE("queries inside a constant block return the block constant") {
        const double v = s.value_at(2500.0);
        for (int t = 2400; t < 6300; t += 117) CHECK(s.value_at(t) == v);
    }
    SUBCASE("AGC steps differ across 1-minute boundaries, equal within") {
        bool any_step_change = false;
        for (int block = 0; block < 14; ++block) {
            const double a = s.value_at(6300 + 60 * block);
            const double b = s.value_at(6300 + 60 * block + 1);
            const double c = s.value_at(6300 + 60 * (block + 1));
            CHECK(a == b);
            if (a != c) any_step_change = true;
        }
        CHECK(any_step_change);
    }
    SUBCASE("ramps move linearly") {
        const double v0 = s.value_at(1800.0);
        const double v1 = s.value_at(1950.0);
        const double v2 = s.value_at(2100.0 - 1e-9);
        CHECK(v1 == doctest::Approx(0.5 * (v0 + v2)).epsilon(1e-6));
    }
}

TEST_CASE("setpoint schedule is deterministic in the seed") {
    const SetpointSchedule a = flat_env_schedule(1234);
    const SetpointSchedule b = flat_env_schedule(1234);
    const SetpointSchedule c = flat_env_schedule(4321);
    bool any_diff = false;
    for (int t = 0; t < 7200; t += 13) {
        CHECK(a.value_at(t) == b.value_at(t));
        if (a.value_at(t) != c.value_at(t)) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("setpoint schedule rejects short horizons") {
    const Vec lo(7000, 0.0), hi(7000, 1.0);
    CHECK_THROWS_AS(generate_setpoint_schedule(7000, lo, hi, 1), ValidationError);
}

TEST_CASE("pv profile: bell support, capacity cap, determinism") {
    const int day = 86400;
    const Profile p = generate_pv_profile(day, 50.0, 11);
    REQUIRE(p.length_s() == day);

    // nighttime start and end of the day
    for (int t = 0; t < 21000; t += 600) CHECK(p.at(t) == 0.0);
    for (int t = 72200; t < day; t += 600) CHECK(p.at(t) == 0.0);

    double peak = 0.0;
    for (int t = 0; t < day; ++t) {
        CHECK(p.at(t) >= 0.0);
        CHECK(p.at(t) <= 50.0);
        peak = std::max(peak, p.at(t));
    }
    CHECK(peak > 20.0);  // midday production is substantial

    const Profile q = generate_pv_profile(day, 50.0, 11);
    CHECK(p.samples == q.samples);
}

TEST_CASE("load scaling stays near one and fast variation is normalized") {
    const Profile s = generate_load_scaling(7200, 13);
    for (int t = 0; t < 7200; ++t) {
        CHECK(s.at(t) >= 0.85);
        CHECK(s.at(t) <= 1.15);
    }
    const Profile churn = generate_fast_variation(7200, 5);
    double mean = 0.0, var = 0.0;
    for (double v : churn.samples) mean += v;
    mean /= churn.length_s();
    for (double v : churn.samples) var += (v - mean) * (v - mean);
    var /= churn.length_s();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("profile CSV ingestion") {
    SUBCASE("valid three-row file") {
        const std::string path = temp_file("dergrid_profile_ok.csv");
        std::ofstream(path) << "t_s,value\n0,1.5\n1,2.5\n2,3.5\n";
        const Profile p = load_profile_csv(path);
        REQUIRE(p.length_s() == 3);
        CHECK(p.at(2) == 3.5);
    }
    SUBCASE("gap in timestamps names the offending row") {
        const std::string path = temp_file("dergrid_profile_gap.csv");
        std::ofstream(path) << "t_s,value\n0,1.0\n2,2.0\n";
        CHECK_THROWS_WITH_AS(load_profile_csv(path), doctest::Contains("row 3"), ParseError);
    }
    SUBCASE("negative value rejected when nonnegativity is required") {
        const std::string path = temp_file("dergrid_profile_neg.csv");
        std::ofstream(path) << "t_s,value\n0,1.0\n1,-2.0\n";
        CHECK_THROWS_AS(load_profile_csv(path, true), ParseError);
        CHECK(load_profile_csv(path, false).at(1) == -2.0);
    }
    SUBCASE("empty and malformed files") {
        const std::string path = temp_file("dergrid_profile_empty.csv");
        std::ofstream(path) << "";
        CHECK_THROWS_AS(load_profile_csv(path), ParseError);
        std::ofstream(path) << "t_s,value\n";
        CHECK_THROWS_AS(load_profile_csv(path), ParseError);
        std::ofstream(path) << "t_s,value\n0,abc\n";
        CHECK_THROWS_AS(load_profile_csv(path), ParseError);
        CHECK_THROWS_AS(load_profile_csv("/nonexistent/profile.csv"), IoError);
    }
    SUBCASE("round-trip is bit-identical") {
        Profile p = generate_pv_profile(600, 50.0, 3);
        const std::string path = temp_file("dergrid_profile_rt.csv");
        save_profile_csv(p, path);
        const Profile back = load_profile_csv(path);
        CHECK(back.samples == p.samples);
    }
}

TEST_CASE("experiment config: defaults and validation") {
    const ExperimentConfig cfg = load_config_file(data_path("config_37node.json"));
    CHECK(cfg.control.v_min == 0.95);
    CHECK(cfg.control.v_max == 1.05);
    CHECK(cfg.control.nu == 1e-3);
    CHECK(cfg.control.epsilon == 1e-4);
    CHECK(cfg.control.e_track == 0.001);
    CHECK(cfg.control.alpha == 0.1);
    CHECK(cfg.control.c_p == 3.0);
    CHECK(cfg.control.c_q == 1.0);
    CHECK(cfg.lstm.lookback == 10);
    CHECK(cfg.delay.loss_rate == 0.01);
    CHECK(cfg.delay.window_start_s == 1800.0);
    CHECK(cfg.delay.window_end_s == 5400.0);
    CHECK(cfg.horizon_s == 7200);
    CHECK(cfg.strategy == Strategy::LstmForecast);
    // relative paths resolved against the config directory
    CHECK(cfg.feeder_path.find("feeder_ieee37.json") != std::string::npos);
    CHECK(cfg.feeder_path.front() == '/');

    CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), IoError);
    CHECK_THROWS_AS(config_from_json("{}", "."), ParseError);
    CHECK_THROWS_WITH_AS(
        config_from_json(R"({"feeder":"x.json","delay":{"direction":"sideways"}})", "."),
        doctest::Contains("direction"), ValidationError);
}
