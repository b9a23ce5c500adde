#include "dergrid/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dergrid {

DualState dual_update(const DualState& d, const Vec& measured_v, double measured_p0,
                      double p0_set, const ControlParams& params,
                      const std::vector<bool>& update_mask) {
    const std::size_t m = d.gamma.size();
    if (measured_v.size() != m)
        throw DimensionError("dual_update: expected " + std::to_string(m) +
                             " voltage measurements, got " + std::to_string(measured_v.size()));
    if (!update_mask.empty() && update_mask.size() != m)
        throw DimensionError("dual_update: mask length mismatch");

    DualState next = d;
    for (std::size_t i = 0; i < m; ++i) {
        if (!update_mask.empty() && !update_mask[i]) continue;
        next.gamma[i] = std::max(0.0, d.gamma[i] + params.alpha * (params.v_min - measured_v[i] -
                                                                   params.epsilon * d.gamma[i]));
        next.mu[i] = std::max(0.0, d.mu[i] + params.alpha * (measured_v[i] - params.v_max -
                                                             params.epsilon * d.mu[i]));
    }
    next.lambda = std::max(0.0, d.lambda + params.alpha * (measured_p0 - p0_set - params.e_track -
                                                           params.epsilon * d.lambda));
    next.zeta = std::max(0.0, d.zeta + params.alpha * (p0_set - measured_p0 - params.e_track -
                                                       params.epsilon * d.zeta));
    return next;
}

std::pair<double, double> lagrangian_gradient(const DerSetpoint& setpoint,
                                              const DerCapability& cap,
                                              const DualState& d,
                                              const LinearGridModel& model,
                                              int der_slot,
                                              std::span<const int> measured_slots,
                                              const ControlParams& params) {
    if (der_slot < 1 || der_slot > model.n())
        throw ValidationError("lagrangian_gradient: slot " + std::to_string(der_slot) +
                              " is outside the model");
    if (measured_slots.size() != d.gamma.size())
        throw DimensionError("lagrangian_gradient: duals and measured set disagree");

    const int col = der_slot - 1;
    double dp = -2.0 * params.c_p * (cap.p_av - setpoint.p) + params.nu * setpoint.p;
    double dq = 2.0 * params.c_q * setpoint.q + params.nu * setpoint.q;
    for (std::size_t k = 0; k < measured_slots.size(); ++k) {
        const int row = measured_slots[k] - 1;
        const double w = d.mu[k] - d.gamma[k];
        dp += w * model.a(row, col);
        dq += w * model.b(row, col);
    }
    const double t = d.lambda - d.zeta;
    dp += t * model.m(0, col);
    dq += t * model.nmat(0, col);
    return {dp, dq};
}

DerSetpoint project_capability(double p, double q, const DerCapability& cap) {
    if (cap.s_max <= 0.0) throw ValidationError("project_capability: s_max must be > 0");
    if (cap.p_av < 0.0) throw ValidationError("project_capability: p_av must be >= 0");

    const double p_hi = std::min(cap.p_av, cap.s_max);

    struct Candidate { double p, q; };
    Candidate cands[6];
    int count = 0;

    // Slab clamp with q free; valid while inside the disk.
    cands[count++] = {std::clamp(p, 0.0, cap.p_av), q};
    // Disk arc by radial scaling; valid while inside the slab.
    const double r = std::hypot(p, q);
    if (r > 0.0) cands[count++] = {cap.s_max * p / r, cap.s_max * q / r};
    // Face/arc corners.
    cands[count++] = {0.0, cap.s_max};
    cands[count++] = {0.0, -cap.s_max};
    const double q_corner = std::sqrt(std::max(0.0, cap.s_max * cap.s_max - p_hi * p_hi));
    cands[count++] = {p_hi, q_corner};
    cands[count++] = {p_hi, -q_corner};

    const double eps = 1e-12 * std::max(1.0, cap.s_max);
    DerSetpoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) {
        const auto& c = cands[i];
        if (c.p < -eps || c.p > cap.p_av + eps) continue;
        if (c.p * c.p + c.q * c.q > cap.s_max * cap.s_max + eps * cap.s_max) continue;
        const double d2 = (c.p - p) * (c.p - p) + (c.q - q) * (c.q - q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best.p = std::clamp(c.p, 0.0, cap.p_av);
            const double q_lim = std::sqrt(std::max(0.0, cap.s_max * cap.s_max - best.p * best.p));
            best.q = std::clamp(c.q, -q_lim, q_lim);
        }
    }
    return best;
}

DerSetpoint primal_update(const DerSetpoint& setpoint, const DerCapability& cap,
                          std::pair<double, double> grad, const ControlParams& params) {
    if (!std::isfinite(grad.first) || !std::isfinite(grad.second))
        throw ValidationError("primal_update: non-finite gradient");
    return project_capability(setpoint.p - params.alpha * grad.first,
                              setpoint.q - params.alpha * grad.second, cap);
}

} // namespace dergrid
