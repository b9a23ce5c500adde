#pragma once

#include "dergrid/feeder.hpp"

namespace dergrid::testing {

struct NrSolution {
    std::vector<Complex> voltage;  // slot-indexed, [0] = head
    bool converged = false;
    int iterations = 0;
};

// Full Newton-Raphson power flow over the bus admittance matrix, with a
// finite-difference Jacobian. Deliberately shares nothing with the sweep
// solver beyond the FeederModel itself; used as the independent oracle.
NrSolution newton_raphson_power_flow(const FeederModel& feeder,
                                     const std::vector<Complex>& injection,
                                     double tol = 1e-10, int max_iter = 50);

} // namespace dergrid::testing
