#include "support/newton_raphson.hpp"

#include <cmath>

#include "dergrid/linalg.hpp"

namespace dergrid::testing {

namespace {

// Mismatch vector [dP_1..dP_N, dQ_1..dQ_N] at the state (theta, vmag).
Vec mismatch(const FeederModel& feeder, const std::vector<std::vector<Complex>>& ybus,
             const std::vector<Complex>& injection, const Vec& theta, const Vec& vmag) {
    const int n = feeder.n();
    Vec f(2 * n, 0.0);
    for (int i = 1; i <= n; ++i) {
        Complex vi = std::polar(vmag[i], theta[i]);
        Complex acc(0.0, 0.0);
        for (int k = 0; k <= n; ++k) {
            const Complex vk = std::polar(vmag[k], theta[k]);
            acc += ybus[i][k] * vk;
        }
        const Complex s = vi * std::conj(acc);  // power injected at bus i
        f[i - 1] = s.real() - injection[i].real();
        f[n + i - 1] = s.imag() - injection[i].imag();
    }
    return f;
}

} // namespace

NrSolution newton_raphson_power_flow(const FeederModel& feeder,
                                     const std::vector<Complex>& injection,
                                     double tol, int max_iter) {
    const int n = feeder.n();
    std::vector<std::vector<Complex>> ybus(n + 1, std::vector<Complex>(n + 1, Complex(0, 0)));
    for (int slot = 1; slot <= n; ++slot) {
        const Complex y = Complex(1.0, 0.0) / feeder.line_z[slot];
        const int p = feeder.parent[slot];
        ybus[slot][slot] += y;
        ybus[p][p] += y;
        ybus[slot][p] -= y;
        ybus[p][slot] -= y;
    }

    Vec theta(n + 1, 0.0);
    Vec vmag(n + 1, feeder.head_voltage_pu);

    NrSolution sol;
    for (int it = 1; it <= max_iter; ++it) {
        sol.iterations = it;
        Vec f = mismatch(feeder, ybus, injection, theta, vmag);
        double worst = 0.0;
        for (double v : f) worst = std::max(worst, std::abs(v));
        if (worst < tol) {
            sol.converged = true;
            break;
        }

        // Finite-difference Jacobian in the unknowns [theta_1.., vmag_1..].
        Matrix jac(2 * n, 2 * n);
        const double h = 1e-7;
        for (int col = 0; col < 2 * n; ++col) {
            Vec tp = theta, vp = vmag, tm = theta, vm = vmag;
            if (col < n) {
                tp[col + 1] += h;
                tm[col + 1] -= h;
            } else {
                vp[col - n + 1] += h;
                vm[col - n + 1] -= h;
            }
            const Vec fp = mismatch(feeder, ybus, injection, tp, vp);
            const Vec fm = mismatch(feeder, ybus, injection, tm, vm);
            for (int row = 0; row < 2 * n; ++row) jac(row, col) = (fp[row] - fm[row]) / (2 * h);
        }

        Vec rhs(2 * n);
        for (int i = 0; i < 2 * n; ++i) rhs[i] = -f[i];
        const Vec dx = solve_dense(std::move(jac), std::move(rhs));
        for (int i = 0; i < n; ++i) {
            theta[i + 1] += dx[i];
            vmag[i + 1] += dx[n + i];
        }
    }

    sol.voltage.resize(n + 1);
    for (int i = 0; i <= n; ++i) sol.voltage[i] = std::polar(vmag[i], theta[i]);
    return sol;
}

} // namespace dergrid::testing
