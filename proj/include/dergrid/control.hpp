#pragma once

#include <cmath>
#include <span>
#include <utility>

#include "dergrid/linmodel.hpp"

namespace dergrid {

struct ControlParams {
    double alpha = 0.1;      // gradient step size
    double nu = 1e-3;        // primal regularization
    double epsilon = 1e-4;   // dual regularization
    double e_track = 0.001;  // setpoint tracking deadband, p.u.
    double v_min = 0.95;     // lower voltage limit, p.u.
    double v_max = 1.05;     // upper voltage limit, p.u.
    double c_p = 3.0;        // weight on curtailed active power
    double c_q = 1.0;        // weight on reactive power use

    void validate() const {
        if (alpha <= 0.0) throw ValidationError("control: alpha must be > 0");
        if (nu < 0.0) throw ValidationError("control: nu must be >= 0");
        if (epsilon < 0.0) throw ValidationError("control: epsilon must be >= 0");
        if (e_track < 0.0) throw ValidationError("control: tracking bound must be >= 0");
        if (v_min >= v_max) throw ValidationError("control: v_min must be < v_max");
        if (c_p < 0.0 || c_q < 0.0) throw ValidationError("control: objective weights must be >= 0");
    }
};

// Multipliers for the voltage band (gamma/mu, one pair per measured node) and
// the tracking deadband (lambda/zeta). Projection onto the nonnegative orthant
// keeps every entry >= 0.
struct DualState {
    Vec gamma;
    Vec mu;
    double lambda = 0.0;
    double zeta = 0.0;

    explicit DualState(std::size_t measured_count = 0)
        : gamma(measured_count, 0.0), mu(measured_count, 0.0) {}

    double norm() const {
        double acc = lambda * lambda + zeta * zeta;
        for (double g : gamma) acc += g * g;
        for (double m : mu) acc += m * m;
        return std::sqrt(acc);
    }
};

// Feasible operating region of a PV inverter: real power in [0, p_av]
// intersected with the apparent-power disk of radius s_max.
struct DerCapability {
    double p_av = 0.0;
    double s_max = 0.0;
};

struct DerSetpoint {
    double p = 0.0;
    double q = 0.0;
};

// One dual ascent step per measured voltage and the head-power deadband.
// measured_v is ordered like the feeder's measured slots. update_mask, when
// non-empty, freezes the gamma/mu pair of every masked-out node (used by the
// skip strategy for late messages).
DualState dual_update(const DualState& d, const Vec& measured_v, double measured_p0,
                      double p0_set, const ControlParams& params,
                      const std::vector<bool>& update_mask = {});

// Gradient of the Lagrangian in one DER's (P, Q). The voltage/head-power
// sensitivities come from the linear model; measured_slots maps dual entries
// to matrix rows. der_slot is the feeder slot of the DER (model row+1).
std::pair<double, double> lagrangian_gradient(const DerSetpoint& setpoint,
                                              const DerCapability& cap,
                                              const DualState& d,
                                              const LinearGridModel& model,
                                              int der_slot,
                                              std::span<const int> measured_slots,
                                              const ControlParams& params);

// Exact Euclidean projection onto the capability set by case enumeration:
// the clamped interior point, the disk arc, and the face/arc corner points
// are all generated and the nearest feasible one wins.
DerSetpoint project_capability(double p, double q, const DerCapability& cap);

// Projected gradient step: project(setpoint - alpha * grad).
DerSetpoint primal_update(const DerSetpoint& setpoint, const DerCapability& cap,
                          std::pair<double, double> grad, const ControlParams& params);

} // namespace dergrid
