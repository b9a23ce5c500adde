#pragma once

#include <functional>
#include <random>

#include "dergrid/control.hpp"
#include "dergrid/feeder.hpp"
#include "dergrid/forecast.hpp"

namespace dergrid::testing {

// Nearest feasible point of the capability set restricted to a square grid of
// the given step. Column-wise reduction over p; exact in q per column.
DerSetpoint grid_projection_oracle(double p, double q, const DerCapability& cap, double step);

// True when (p, q) lies in the capability set up to `tol`.
bool feasible(double p, double q, const DerCapability& cap, double tol = 1e-12);

// Straight-line scalar re-implementation of the LSTM step equations, written
// against the equations rather than the production code path.
void scalar_cell_forward(const LstmCell& cell, const Vec& x, const Vec& h_prev,
                         const Vec& c_prev, Vec& h_out, Vec& c_out);

// Central finite difference of a scalar function.
double central_diff(const std::function<double(double)>& f, double x, double h);

// Deterministic feeder fuzzer: random radial tree with 2..max_nodes non-head
// nodes, seeded impedances and loads.
FeederModel random_radial_feeder(std::mt19937_64& rng, int max_nodes);

// Random injections within sane per-unit bounds for the fuzzed feeders.
std::vector<Complex> random_injection(std::mt19937_64& rng, const FeederModel& feeder,
                                      double magnitude);

} // namespace dergrid::testing
