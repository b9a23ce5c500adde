#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "dergrid/feeder.hpp"
#include "support/newton_raphson.hpp"
#include "support/oracles.hpp"

using namespace dergrid;

namespace {

std::string data_path(const char* name) { return std::string(DERGRID_DATA_DIR "/") + name; }

std::string two_node_doc(double r_ohm = 0.01, double x_ohm = 0.01, double p_kw = 100.0,
                         double q_kvar = 0.0) {
    std::ostringstream os;
    os << R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1],)"
       << R"("lines":[{"from":0,"to":1,"r_ohm":)" << r_ohm << R"(,"x_ohm":)" << x_ohm << "}],"
       << R"("loads":[{"node":1,"p_kw":)" << p_kw << R"(,"q_kvar":)" << q_kvar << "}]}";
    return os.str();
}

} // namespace

TEST_CASE("parse_feeder accepts the smallest legal feeder") {
    const FeederModel f = parse_feeder(two_node_doc());
    CHECK(f.n() == 1);
    CHECK(f.load[1] == Complex(0.1, 0.0));
    CHECK(f.line_z[1] == Complex(0.01, 0.01));
    CHECK(f.parent[1] == 0);
}

TEST_CASE("parse_feeder reads the bundled 37-node feeder") {
    const FeederModel f = load_feeder_file(data_path("feeder_ieee37.json"));
    CHECK(f.n() == 36);
    CHECK(f.der_slots.size() == 18);
    CHECK(f.measured_slots.size() == 20);
    CHECK(f.base_kva == 2500.0);
    for (int s = 1; s <= f.n(); ++s) {
        CHECK(f.line_z[s].real() >= 0.0);
        CHECK(f.line_z[s].imag() >= 0.0);
    }
}

TEST_CASE("parse_feeder rejects a duplicated line (cycle)") {
    const std::string doc =
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1,2],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01},
                     {"from":1,"to":2,"r_ohm":0.01,"x_ohm":0.01},
                     {"from":0,"to":2,"r_ohm":0.01,"x_ohm":0.01}]})";
    CHECK_THROWS_AS(parse_feeder(doc), ValidationError);
}

TEST_CASE("parse_feeder rejects disconnection and negative impedance") {
    CHECK_THROWS_AS(parse_feeder(
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1,2,3],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01},
                     {"from":0,"to":1,"r_ohm":0.02,"x_ohm":0.01},
                     {"from":2,"to":3,"r_ohm":0.01,"x_ohm":0.01}]})"), ValidationError);
    CHECK_THROWS_AS(parse_feeder(two_node_doc(-0.01)), ValidationError);
    CHECK_THROWS_WITH_AS(parse_feeder(R"({"base_kva":1000})"),
                         doctest::Contains("base_kv"), ParseError);
    CHECK_THROWS_AS(parse_feeder("{not json"), ParseError);
}

TEST_CASE("parse_feeder rejects load or DER on the head node") {
    CHECK_THROWS_AS(parse_feeder(
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01}],
            "loads":[{"node":0,"p_kw":5,"q_kvar":0}]})"), ValidationError);
    CHECK_THROWS_AS(parse_feeder(
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01}],
            "ders":[{"node":0,"capacity_kva":50}]})"), ValidationError);
}

TEST_CASE("solve_power_flow: zero injections and zero loads give a flat profile") {
    FeederModel f = parse_feeder(two_node_doc(0.01, 0.01, 0.0, 0.0));
    const std::vector<Complex> inj(2, Complex(0.0, 0.0));
    const PowerFlowSolution sol = solve_power_flow(f, inj);
    CHECK(sol.converged);
    CHECK(std::abs(sol.voltage[1] - Complex(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(sol.head_power) < 1e-12);
}

TEST_CASE("solve_power_flow on the 2-node feeder matches Newton-Raphson") {
    const FeederModel f = parse_feeder(two_node_doc());
    const auto inj = net_injection(f, {});
    const PowerFlowSolution bfs = solve_power_flow(f, inj, 1e-10, 100);
    REQUIRE(bfs.converged);
    CHECK(std::abs(bfs.voltage[1]) < 1.0);

    const auto nr = testing::newton_raphson_power_flow(f, inj);
    REQUIRE(nr.converged);
    CHECK(std::abs(std::abs(bfs.voltage[1]) - std::abs(nr.voltage[1])) < 1e-8);
}

TEST_CASE("solve_power_flow: injection cancelling the load restores the flat profile") {
    const std::string doc =
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01}],
            "loads":[{"node":1,"p_kw":100,"q_kvar":0}],
            "ders":[{"node":1,"capacity_kva":200}]})";
    const FeederModel f = parse_feeder(doc);
    const std::vector<DerDispatch> dispatch{{1, 0.1, 0.0}};
    const auto inj = net_injection(f, dispatch);
    const PowerFlowSolution sol = solve_power_flow(f, inj);
    CHECK(sol.converged);
    CHECK(std::abs(sol.voltage[1] - Complex(1.0, 0.0)) < 1e-10);
    CHECK(std::abs(sol.head_power.real()) < 1e-10);
}

TEST_CASE("net_injection sign conventions") {
    SUBCASE("load only") {
        const FeederModel f = parse_feeder(two_node_doc(0.01, 0.01, 100.0, 50.0));
        const auto inj = net_injection(f, {});
        CHECK(inj[1].real() == doctest::Approx(-0.1).epsilon(1e-12));
        CHECK(inj[1].imag() == doctest::Approx(-0.05).epsilon(1e-12));
    }
    SUBCASE("DER cancelling and partially offsetting the load") {
        const std::string doc =
            R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1,2],
                "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01},
                         {"from":1,"to":2,"r_ohm":0.01,"x_ohm":0.01}],
                "loads":[{"node":1,"p_kw":100,"q_kvar":0},{"node":2,"p_kw":30,"q_kvar":10}],
                "ders":[{"node":1,"capacity_kva":200},{"node":2,"capacity_kva":200}]})";
        const FeederModel f = parse_feeder(doc);
        const std::vector<DerDispatch> dispatch{{1, 0.1, 0.0}, {2, 0.05, 0.02}};
        const auto inj = net_injection(f, dispatch);
        CHECK(std::abs(inj[1] - Complex(0.0, 0.0)) < 1e-12);
        // direct substitution: (0.05 - 0.03) + j(0.02 - 0.01)
        CHECK(std::abs(inj[2] - Complex(0.02, 0.01)) < 1e-12);
    }
    SUBCASE("setpoint for a node without a DER") {
        const FeederModel f = parse_feeder(two_node_doc());
        const std::vector<DerDispatch> dispatch{{1, 0.1, 0.0}};
        CHECK_THROWS_AS(net_injection(f, dispatch), ValidationError);
    }
}

TEST_CASE("power conservation: head power equals served load plus line losses") {
    std::mt19937_64 rng(20240815);
    for (int trial = 0; trial < 25; ++trial) {
        const FeederModel f = testing::random_radial_feeder(rng, 6);
        const auto inj = net_injection(f, {});
        const PowerFlowSolution sol = solve_power_flow(f, inj, 1e-10, 200);
        REQUIRE(sol.converged);

        double losses = 0.0;
        for (int s = 1; s <= f.n(); ++s)
            losses += std::norm(sol.branch_current[s]) * f.line_z[s].real();
        CHECK(losses >= 0.0);

        double served = 0.0;
        for (int s = 1; s <= f.n(); ++s) served += -inj[s].real();
        CHECK(sol.head_power.real() == doctest::Approx(served + losses).epsilon(1e-8));
    }
}

TEST_CASE("monotone sanity: heavier load strictly lowers the 2-node voltage") {
    double prev = 2.0;
    for (int k = 1; k <= 10; ++k) {
        const FeederModel f = parse_feeder(two_node_doc(0.01, 0.01, 40.0 * k));
        const PowerFlowSolution sol = solve_power_flow(f, net_injection(f, {}));
        REQUIRE(sol.converged);
        const double v = std::abs(sol.voltage[1]);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("sweep solver matches Newton-Raphson on random radial feeders") {
    std::mt19937_64 rng(7777);
    for (int trial = 0; trial < 30; ++trial) {
        const FeederModel f = testing::random_radial_feeder(rng, 6);
        const auto inj = net_injection(f, {});
        const PowerFlowSolution bfs = solve_power_flow(f, inj, 1e-10, 200);
        const auto nr = testing::newton_raphson_power_flow(f, inj);
        REQUIRE(bfs.converged);
        REQUIRE(nr.converged);
        for (int s = 0; s <= f.n(); ++s)
            CHECK(std::abs(std::abs(bfs.voltage[s]) - std::abs(nr.voltage[s])) < 1e-7);
    }
}

TEST_CASE("non-convergence is reported, not thrown") {
    // A load far beyond the deliverable power collapses the voltage.
    const FeederModel f = parse_feeder(two_node_doc(0.01, 0.01, 30000.0));
    const PowerFlowSolution sol = solve_power_flow(f, net_injection(f, {}), 1e-10, 50);
    CHECK_FALSE(sol.converged);
}
