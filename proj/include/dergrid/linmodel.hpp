#pragma once

#include <string>
#include <utility>

#include "dergrid/feeder.hpp"
#include "dergrid/linalg.hpp"

namespace dergrid {

// Affine sensitivity model of the feeder around an operating point:
//   |v|        ~ A p_inj + B q_inj + c
//   [P0, Q0]^T ~ M p_inj + N q_inj + o
// Vectors are indexed over the non-head nodes in slot order (slot s -> row s-1).
struct LinearGridModel {
    Matrix a;     // N x N, d|v| / dp
    Matrix b;     // N x N, d|v| / dq
    Matrix m;     // 2 x N, d[P0,Q0] / dp
    Matrix nmat;  // 2 x N, d[P0,Q0] / dq
    Vec c;        // N, voltage offset
    Vec o;        // 2, head-power offset

    int n() const { return static_cast<int>(c.size()); }
};

struct LinearPrediction {
    Vec voltage_mag;     // N entries
    double p0 = 0.0;
    double q0 = 0.0;
};

// Classical LinDistFlow construction: A[n][m] = R_nm / V0 with R_nm the summed
// resistance of the lines shared by the head->n and head->m paths, B likewise
// from reactances, c = V0 * 1. The head-power rows are the lossless balance
// M = [-1^T; 0], N = [0; -1^T], o = 0.
LinearGridModel linearize_analytic(const FeederModel& feeder);

// Central finite differences of solve_power_flow around `operating_injection`.
// c and o are chosen so the model is exact at the operating point. Throws
// DivergenceError if any perturbed power flow fails to converge.
LinearGridModel linearize_numeric(const FeederModel& feeder,
                                  const std::vector<Complex>& operating_injection,
                                  double step = 1e-4);

// Evaluates the affine model.
LinearPrediction predict(const LinearGridModel& model, const Vec& p_inj, const Vec& q_inj);

// JSON matrix bundle for reproducibility.
std::string linear_model_to_json(const LinearGridModel& model);
LinearGridModel linear_model_from_json(const std::string& json_text);

} // namespace dergrid
