#include <doctest.h>

#include <random>

#include "dergrid/linmodel.hpp"
#include "support/oracles.hpp"

using namespace dergrid;

namespace {

std::string data_path(const char* name) { return std::string(DERGRID_DATA_DIR "/") + name; }

FeederModel two_node(double r = 0.01, double x = 0.02) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1],
                      "lines":[{"from":0,"to":1,"r_ohm":%g,"x_ohm":%g}]})",
                  r, x);
    return parse_feeder(buf);
}

FeederModel chain_three() {
    return parse_feeder(
        R"({"base_kva":1000,"base_kv":1,"head_voltage_pu":1.0,"nodes":[0,1,2],
            "lines":[{"from":0,"to":1,"r_ohm":0.01,"x_ohm":0.01},
                     {"from":1,"to":2,"r_ohm":0.01,"x_ohm":0.01}]})");
}

} // namespace

TEST_CASE("linearize_analytic on the 2-node feeder") {
    const LinearGridModel m = linearize_analytic(two_node());
    CHECK(m.a(0, 0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(m.b(0, 0) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(m.c[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.m(0, 0) == -1.0);
    CHECK(m.m(1, 0) == 0.0);
    CHECK(m.nmat(0, 0) == 0.0);
    CHECK(m.nmat(1, 0) == -1.0);
    CHECK(m.o[0] == 0.0);
    CHECK(m.o[1] == 0.0);
}

TEST_CASE("common-path rule on the 0-1-2 chain") {
    const LinearGridModel m = linearize_analytic(chain_three());
    // off-diagonal entries share only the head line
    CHECK(m.a(0, 1) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(m.a(1, 0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(m.a(0, 0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(m.a(1, 1) == doctest::Approx(0.02).epsilon(1e-14));
}

TEST_CASE("analytic A and B are symmetric and nonnegative") {
    const FeederModel f = load_feeder_file(data_path("feeder_ieee37.json"));
    const LinearGridModel m = linearize_analytic(f);
    for (int r = 0; r < m.n(); ++r) {
        for (int c = 0; c < m.n(); ++c) {
            CHECK(m.a(r, c) == m.a(c, r));
            CHECK(m.b(r, c) == m.b(c, r));
            CHECK(m.a(r, c) >= 0.0);
            CHECK(m.b(r, c) >= 0.0);
        }
    }
}

TEST_CASE("predict: zero injection returns the offsets") {
    const LinearGridModel m = linearize_analytic(chain_three());
    const auto pred = predict(m, {0.0, 0.0}, {0.0, 0.0});
    CHECK(pred.voltage_mag[0] == m.c[0]);
    CHECK(pred.voltage_mag[1] == m.c[1]);
    CHECK(pred.p0 == m.o[0]);
    CHECK(pred.q0 == m.o[1]);
}

TEST_CASE("predict: hand-evaluated affine map on the 2-node model") {
    const LinearGridModel m = linearize_analytic(two_node());
    const auto pred = predict(m, {0.01}, {0.0});
    CHECK(pred.voltage_mag[0] == doctest::Approx(1.0001).epsilon(1e-12));
    CHECK(pred.p0 == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("predict is affine") {
    const LinearGridModel m = linearize_analytic(chain_three());
    const Vec p{0.013, -0.007}, q{-0.004, 0.009};
    const auto at0 = predict(m, {0.0, 0.0}, {0.0, 0.0});
    const auto at1 = predict(m, p, q);
    Vec p2 = p, q2 = q;
    for (auto& v : p2) v *= 2.0;
    for (auto& v : q2) v *= 2.0;
    const auto at2 = predict(m, p2, q2);
    for (int i = 0; i < 2; ++i)
        CHECK(at2.voltage_mag[i] - at0.voltage_mag[i] ==
              doctest::Approx(2.0 * (at1.voltage_mag[i] - at0.voltage_mag[i])).epsilon(1e-12));
    CHECK(at2.p0 - at0.p0 == doctest::Approx(2.0 * (at1.p0 - at0.p0)).epsilon(1e-12));
}

TEST_CASE("predict rejects mismatched lengths") {
    const LinearGridModel m = linearize_analytic(chain_three());
    CHECK_THROWS_AS(predict(m, {0.0}, {0.0, 0.0}), DimensionError);
}

TEST_CASE("linearize_numeric approaches the analytic model on the 2-node feeder") {
    const FeederModel f = two_node();
    const std::vector<Complex> op(2, Complex(0.0, 0.0));
    const LinearGridModel num = linearize_numeric(f, op, 1e-5);
    const LinearGridModel ana = linearize_analytic(f);
    CHECK(num.a(0, 0) == doctest::Approx(ana.a(0, 0)).epsilon(1e-3));
    CHECK(num.b(0, 0) == doctest::Approx(ana.b(0, 0)).epsilon(1e-3));
    CHECK(num.c[0] == doctest::Approx(ana.c[0]).epsilon(1e-6));
}

TEST_CASE("linearize_numeric is exact at the operating point") {
    const FeederModel f = load_feeder_file(data_path("feeder_6node.json"));
    const std::vector<DerDispatch> dispatch{{3, 0.05, 0.01}, {4, 0.02, 0.0}};
    auto op = net_injection(f, dispatch);
    const LinearGridModel m = linearize_numeric(f, op);
    const PowerFlowSolution sol = solve_power_flow(f, op);
    REQUIRE(sol.converged);

    Vec p(f.n()), q(f.n());
    for (int s = 1; s <= f.n(); ++s) {
        p[s - 1] = op[s].real();
        q[s - 1] = op[s].imag();
    }
    const auto pred = predict(m, p, q);
    for (int s = 1; s <= f.n(); ++s)
        CHECK(pred.voltage_mag[s - 1] == doctest::Approx(std::abs(sol.voltage[s])).epsilon(1e-12));
    CHECK(pred.p0 == doctest::Approx(sol.head_power.real()).epsilon(1e-12));
}

TEST_CASE("zero-resistance line contributes nothing to A") {
    const FeederModel f = two_node(0.0, 0.02);
    const LinearGridModel ana = linearize_analytic(f);
    CHECK(ana.a(0, 0) == 0.0);
    const std::vector<Complex> op(2, Complex(0.0, 0.0));
    const LinearGridModel num = linearize_numeric(f, op, 1e-5);
    CHECK(std::abs(num.a(0, 0)) < 1e-6);
}

TEST_CASE("numeric and analytic Jacobians agree at zero injection") {
    for (const char* file : {"feeder_6node.json", "feeder_2node.json"}) {
        const FeederModel f = load_feeder_file(data_path(file));
        const std::vector<Complex> op(f.n() + 1, Complex(0.0, 0.0));
        const LinearGridModel num = linearize_numeric(f, op, 1e-4);
        const LinearGridModel ana = linearize_analytic(f);
        for (int r = 0; r < ana.n(); ++r)
            for (int c = 0; c < ana.n(); ++c) {
                CHECK(std::abs(num.a(r, c) - ana.a(r, c)) < 5e-3);
                CHECK(std::abs(num.b(r, c) - ana.b(r, c)) < 5e-3);
            }
    }
}

TEST_CASE("head-power row: +dP at any node lowers predicted P0 by exactly dP") {
    const FeederModel f = load_feeder_file(data_path("feeder_6node.json"));
    const LinearGridModel m = linearize_analytic(f);
    Vec p(f.n(), 0.0), q(f.n(), 0.0);
    const auto base = predict(m, p, q);
    for (int i = 0; i < f.n(); ++i) {
        p.assign(f.n(), 0.0);
        p[i] = 0.037;
        const auto bumped = predict(m, p, q);
        CHECK(bumped.p0 - base.p0 == doctest::Approx(-0.037).epsilon(1e-12));
    }
}

TEST_CASE("model accuracy on the 37-node feeder over random feasible dispatches") {
    const FeederModel f = load_feeder_file(data_path("feeder_ieee37.json"));
    const LinearGridModel m = linearize_analytic(f);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<DerDispatch> dispatch;
        for (int slot : f.der_slots) {
            const double s_max = f.der_capacity_pu.at(slot);
            const double pr = u(rng) * s_max;
            const double q_lim = std::sqrt(s_max * s_max - pr * pr);
            dispatch.push_back({f.node_ids[slot], pr, (2.0 * u(rng) - 1.0) * q_lim});
        }
        const auto inj = net_injection(f, dispatch);
        const PowerFlowSolution sol = solve_power_flow(f, inj);
        REQUIRE(sol.converged);

        Vec p(f.n()), q(f.n());
        for (int s = 1; s <= f.n(); ++s) {
            p[s - 1] = inj[s].real();
            q[s - 1] = inj[s].imag();
        }
        const auto pred = predict(m, p, q);
        for (int s = 1; s <= f.n(); ++s)
            CHECK(std::abs(pred.voltage_mag[s - 1] - std::abs(sol.voltage[s])) <= 0.01);
    }
}

TEST_CASE("linear model JSON bundle round-trips") {
    const FeederModel f = load_feeder_file(data_path("feeder_6node.json"));
    const LinearGridModel m = linearize_analytic(f);
    const LinearGridModel back = linear_model_from_json(linear_model_to_json(m));
    CHECK(back.a.data == m.a.data);
    CHECK(back.b.data == m.b.data);
    CHECK(back.m.data == m.m.data);
    CHECK(back.nmat.data == m.nmat.data);
    CHECK(back.c == m.c);
    CHECK(back.o == m.o);
}
