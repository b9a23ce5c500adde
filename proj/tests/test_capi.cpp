// Exercises the extern-C surface the CLI and bindings consume.

#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "dergrid.h"

#define REQUIRE(cond)                                                        \
    do {                                                                     \
        if (!(cond)) {                                                       \
            std::fprintf(stderr, "FAILED %s:%d: %s (last error: %s)\n",      \
                         __FILE__, __LINE__, #cond, dergrid_last_error());   \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main() {
    const std::string feeder_path = std::string(DERGRID_DATA_DIR "/feeder_2node.json");
    const std::string config_path = std::string(DERGRID_DATA_DIR "/config_37node.json");

    REQUIRE(std::strcmp(dergrid_version(), "") != 0);

    // feeder lifecycle + error reporting
    dergrid_feeder* feeder = nullptr;
    REQUIRE(dergrid_feeder_load("/nonexistent/feeder.json", &feeder) == DERGRID_ERR_PARSE ||
            dergrid_feeder_load("/nonexistent/feeder.json", &feeder) == DERGRID_ERR_IO);
    REQUIRE(std::strlen(dergrid_last_error()) > 0);
    REQUIRE(dergrid_feeder_load(feeder_path.c_str(), &feeder) == DERGRID_OK);
    REQUIRE(dergrid_feeder_node_count(feeder) == 1);
    REQUIRE(dergrid_feeder_der_count(feeder) == 0);

    dergrid_feeder* bad = nullptr;
    REQUIRE(dergrid_feeder_parse("{\"base_kva\":-5}", &bad) != DERGRID_OK);

    // power flow through the C surface
    char* solution = nullptr;
    REQUIRE(dergrid_solve_power_flow(feeder, nullptr, 1e-10, 100, &solution) == DERGRID_OK);
    REQUIRE(std::strstr(solution, "\"converged\": true") != nullptr);
    REQUIRE(std::strstr(solution, "head_p_kw") != nullptr);
    dergrid_string_free(solution);

    // linearization bundle
    char* model = nullptr;
    REQUIRE(dergrid_linearize(feeder, 0, 0.0, &model) == DERGRID_OK);
    REQUIRE(std::strstr(model, "\"nmat\"") != nullptr);
    dergrid_string_free(model);
    dergrid_feeder_free(feeder);

    // config + calibration
    dergrid_config* config = nullptr;
    REQUIRE(dergrid_config_load(config_path.c_str(), &config) == DERGRID_OK);
    REQUIRE(dergrid_config_set_strategy(config, "warp") == DERGRID_ERR_VALIDATION);
    REQUIRE(dergrid_config_set_strategy(config, "skip") == DERGRID_OK);

    double d_star = 0.0;
    REQUIRE(dergrid_calibrate_delay(config, 0.01, 200000, &d_star) == DERGRID_OK);
    REQUIRE(std::fabs(d_star - 6.675) < 0.1);

    double d_star_10 = 0.0;
    REQUIRE(dergrid_calibrate_delay(config, 0.10, 200000, &d_star_10) == DERGRID_OK);
    REQUIRE(d_star_10 < d_star);

    REQUIRE(dergrid_calibrate_delay(config, 1.5, 1000, &d_star) == DERGRID_ERR_VALIDATION);

    // null-argument handling
    REQUIRE(dergrid_run(nullptr, nullptr) == DERGRID_ERR_NULL_ARGUMENT);
    REQUIRE(dergrid_config_load(config_path.c_str(), nullptr) == DERGRID_ERR_NULL_ARGUMENT);

    dergrid_config_free(config);
    std::puts("capi tests passed");
    return 0;
}
