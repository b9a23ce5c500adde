#include "dergrid/linmodel.hpp"

#include <cmath>

#include <json.hpp>

namespace dergrid {

using nlohmann::json;

LinearGridModel linearize_analytic(const FeederModel& feeder) {
    const int n = feeder.n();
    LinearGridModel m;
    m.a = Matrix(n, n);
    m.b = Matrix(n, n);
    m.m = Matrix(2, n);
    m.nmat = Matrix(2, n);
    m.c.assign(n, feeder.head_voltage_pu);
    m.o.assign(2, 0.0);

    // Accumulated path impedance from the head down to every node.
    std::vector<Complex> path_z(n + 1, Complex(0.0, 0.0));
    std::vector<int> depth(n + 1, 0);
    for (int s : feeder.order) {
        if (s == 0) continue;
        path_z[s] = path_z[feeder.parent[s]] + feeder.line_z[s];
        depth[s] = depth[feeder.parent[s]] + 1;
    }

    // Common-path impedance of two nodes = path impedance of their lowest
    // common ancestor.
    auto common_path = [&](int u, int v) {
        while (u != v) {
            if (depth[u] >= depth[v]) u = feeder.parent[u];
            else v = feeder.parent[v];
        }
        return path_z[u];
    };

    for (int su = 1; su <= n; ++su) {
        for (int sv = su; sv <= n; ++sv) {
            const Complex z = common_path(su, sv);
            m.a(su - 1, sv - 1) = z.real() / feeder.head_voltage_pu;
            m.a(sv - 1, su - 1) = m.a(su - 1, sv - 1);
            m.b(su - 1, sv - 1) = z.imag() / feeder.head_voltage_pu;
            m.b(sv - 1, su - 1) = m.b(su - 1, sv - 1);
        }
    }
    for (int i = 0; i < n; ++i) {
        m.m(0, i) = -1.0;
        m.nmat(1, i) = -1.0;
    }
    return m;
}

LinearGridModel linearize_numeric(const FeederModel& feeder,
                                  const std::vector<Complex>& operating_injection,
                                  double step) {
    const int n = feeder.n();
    if (step <= 0.0) throw ValidationError("linearize_numeric: step must be > 0");

    auto solve = [&](const std::vector<Complex>& inj) {
        PowerFlowSolution s = solve_power_flow(feeder, inj);
        if (!s.converged)
            throw DivergenceError("linearize_numeric: power flow diverged at a perturbed point");
        return s;
    };

    LinearGridModel m;
    m.a = Matrix(n, n);
    m.b = Matrix(n, n);
    m.m = Matrix(2, n);
    m.nmat = Matrix(2, n);
    m.c.assign(n, 0.0);
    m.o.assign(2, 0.0);

    const PowerFlowSolution base = solve(operating_injection);

    std::vector<Complex> inj = operating_injection;
    for (int col = 0; col < n; ++col) {
        const int s = col + 1;
        for (int part = 0; part < 2; ++part) {
            const Complex delta = part == 0 ? Complex(step, 0.0) : Complex(0.0, step);
            inj[s] = operating_injection[s] + delta;
            const PowerFlowSolution hi = solve(inj);
            inj[s] = operating_injection[s] - delta;
            const PowerFlowSolution lo = solve(inj);
            inj[s] = operating_injection[s];

            Matrix& volt = part == 0 ? m.a : m.b;
            Matrix& head = part == 0 ? m.m : m.nmat;
            for (int row = 0; row < n; ++row)
                volt(row, col) = (std::abs(hi.voltage[row + 1]) - std::abs(lo.voltage[row + 1])) / (2.0 * step);
            head(0, col) = (hi.head_power.real() - lo.head_power.real()) / (2.0 * step);
            head(1, col) = (hi.head_power.imag() - lo.head_power.imag()) / (2.0 * step);
        }
    }

    // Pin the affine terms so the model reproduces the operating point exactly.
    Vec p_op(n), q_op(n);
    for (int i = 0; i < n; ++i) {
        p_op[i] = operating_injection[i + 1].real();
        q_op[i] = operating_injection[i + 1].imag();
    }
    const Vec va = m.a.apply(p_op);
    const Vec vb = m.b.apply(q_op);
    for (int i = 0; i < n; ++i)
        m.c[i] = std::abs(base.voltage[i + 1]) - va[i] - vb[i];
    const Vec hm = m.m.apply(p_op);
    const Vec hn = m.nmat.apply(q_op);
    m.o[0] = base.head_power.real() - hm[0] - hn[0];
    m.o[1] = base.head_power.imag() - hm[1] - hn[1];
    return m;
}

LinearPrediction predict(const LinearGridModel& model, const Vec& p_inj, const Vec& q_inj) {
    const int n = model.n();
    if (static_cast<int>(p_inj.size()) != n || static_cast<int>(q_inj.size()) != n)
        throw DimensionError("predict: expected injection vectors of length " + std::to_string(n));

    LinearPrediction out;
    out.voltage_mag = model.a.apply(p_inj);
    const Vec vb = model.b.apply(q_inj);
    for (int i = 0; i < n; ++i) out.voltage_mag[i] += vb[i] + model.c[i];

    const Vec hp = model.m.apply(p_inj);
    const Vec hq = model.nmat.apply(q_inj);
    out.p0 = hp[0] + hq[0] + model.o[0];
    out.q0 = hp[1] + hq[1] + model.o[1];
    return out;
}

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw ParseError("linear model bundle: malformed matrix '" + name + "'");
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto d = j.at("data").get<Vec>();
    if (d.size() != m.rows * m.cols)
        throw ParseError("linear model bundle: matrix '" + name + "' data length mismatch");
    m.data = d;
    return m;
}

} // namespace

std::string linear_model_to_json(const LinearGridModel& model) {
    json j{{"n", model.n()},
           {"a", matrix_to_json(model.a)},
           {"b", matrix_to_json(model.b)},
           {"m", matrix_to_json(model.m)},
           {"nmat", matrix_to_json(model.nmat)},
           {"c", model.c},
           {"o", model.o}};
    return j.dump(2);
}

LinearGridModel linear_model_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("linear model bundle: ") + e.what());
    }
    LinearGridModel m;
    m.a = matrix_from_json(j.at("a"), "a");
    m.b = matrix_from_json(j.at("b"), "b");
    m.m = matrix_from_json(j.at("m"), "m");
    m.nmat = matrix_from_json(j.at("nmat"), "nmat");
    m.c = j.at("c").get<Vec>();
    m.o = j.at("o").get<Vec>();
    const int n = m.n();
    if (m.a.rows != static_cast<std::size_t>(n) || m.a.cols != static_cast<std::size_t>(n) ||
        m.b.rows != static_cast<std::size_t>(n) || m.b.cols != static_cast<std::size_t>(n) ||
        m.m.cols != static_cast<std::size_t>(n) || m.nmat.cols != static_cast<std::size_t>(n) ||
        m.m.rows != 2 || m.nmat.rows != 2 || m.o.size() != 2)
        throw ParseError("linear model bundle: inconsistent dimensions");
    return m;
}

} // namespace dergrid
