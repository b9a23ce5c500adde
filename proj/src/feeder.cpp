#include "dergrid/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace dergrid {

using nlohmann::json;

namespace {

double require_number(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key))
        throw ParseError(ctx + ": missing field '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ParseError(ctx + ": field '" + key + "' must be a number");
    return v.get<double>();
}

int require_int(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key))
        throw ParseError(ctx + ": missing field '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer())
        throw ParseError(ctx + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

} // namespace

FeederModel parse_feeder(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("feeder document: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("feeder document: top level must be an object");

    FeederModel f;
    f.base_kva = require_number(doc, "base_kva", "feeder");
    f.base_kv = require_number(doc, "base_kv", "feeder");
    f.head_voltage_pu = require_number(doc, "head_voltage_pu", "feeder");
    if (f.base_kva <= 0.0) throw ValidationError("feeder: base_kva must be > 0");
    if (f.base_kv <= 0.0) throw ValidationError("feeder: base_kv must be > 0");
    if (f.head_voltage_pu <= 0.0) throw ValidationError("feeder: head_voltage_pu must be > 0");

    // kV^2 * 1000 / kVA yields ohms.
    const double z_base_ohm = f.base_kv * f.base_kv * 1000.0 / f.base_kva;

    if (!doc.contains("nodes") || !doc.at("nodes").is_array())
        throw ParseError("feeder: missing or non-array field 'nodes'");
    for (const auto& n : doc.at("nodes")) {
        if (!n.is_number_integer()) throw ParseError("feeder: nodes[] entries must be integers");
        const NodeId id = n.get<NodeId>();
        if (f.slot_of.count(id)) throw ValidationError("feeder: duplicate node id " + std::to_string(id));
        f.slot_of[id] = static_cast<int>(f.node_ids.size());
        f.node_ids.push_back(id);
    }
    if (f.node_ids.empty()) throw ValidationError("feeder: nodes[] is empty");
    if (!f.slot_of.count(0)) throw ValidationError("feeder: node 0 (the feeder head) is required");
    if (f.node_ids[0] != 0) {
        // Re-slot so the head sits at slot 0.
        std::vector<NodeId> ids = f.node_ids;
        std::swap(ids[0], ids[f.slot_of.at(0)]);
        f.slot_of.clear();
        f.node_ids = ids;
        for (int s = 0; s < static_cast<int>(ids.size()); ++s) f.slot_of[ids[s]] = s;
    }

    const int total = static_cast<int>(f.node_ids.size());
    const int n = total - 1;

    if (!doc.contains("lines") || !doc.at("lines").is_array())
        throw ParseError("feeder: missing or non-array field 'lines'");
    struct RawLine { int a, b; Complex z; };
    std::vector<RawLine> lines;
    int li = 0;
    for (const auto& l : doc.at("lines")) {
        const std::string ctx = "lines[" + std::to_string(li++) + "]";
        const NodeId from = require_int(l, "from", ctx);
        const NodeId to = require_int(l, "to", ctx);
        const double r_ohm = require_number(l, "r_ohm", ctx);
        const double x_ohm = require_number(l, "x_ohm", ctx);
        if (r_ohm < 0.0 || x_ohm < 0.0)
            throw ValidationError(ctx + ": negative impedance (r_ohm=" + std::to_string(r_ohm) +
                                  ", x_ohm=" + std::to_string(x_ohm) + ")");
        if (!f.slot_of.count(from)) throw ValidationError(ctx + ": unknown node " + std::to_string(from));
        if (!f.slot_of.count(to)) throw ValidationError(ctx + ": unknown node " + std::to_string(to));
        lines.push_back({f.slot_of.at(from), f.slot_of.at(to),
                         Complex(r_ohm / z_base_ohm, x_ohm / z_base_ohm)});
    }

    if (static_cast<int>(lines.size()) != n)
        throw ValidationError("feeder: " + std::to_string(total) + " nodes require " +
                              std::to_string(n) + " lines to form a tree, got " +
                              std::to_string(lines.size()) +
                              (static_cast<int>(lines.size()) > n ? " (cycle)" : " (disconnected)"));

    // Root the tree at the head by BFS over the undirected line set.
    std::vector<std::vector<std::pair<int, Complex>>> adj(total);
    for (const auto& l : lines) {
        if (l.a == l.b) throw ValidationError("feeder: self-loop at node " +
                                              std::to_string(f.node_ids[l.a]) + " (cycle)");
        adj[l.a].push_back({l.b, l.z});
        adj[l.b].push_back({l.a, l.z});
    }
    f.parent.assign(total, -2);
    f.children.assign(total, {});
    f.line_z.assign(total, Complex(0.0, 0.0));
    f.parent[0] = -1;
    f.order.clear();
    f.order.push_back(0);
    for (std::size_t q = 0; q < f.order.size(); ++q) {
        const int u = f.order[q];
        for (const auto& [v, z] : adj[u]) {
            if (f.parent[v] != -2) {
                if (v != f.parent[u])
                    throw ValidationError("feeder: line set contains a cycle through node " +
                                          std::to_string(f.node_ids[v]));
                continue;
            }
            f.parent[v] = u;
            f.children[u].push_back(v);
            f.line_z[v] = z;
            f.order.push_back(v);
        }
    }
    if (static_cast<int>(f.order.size()) != total) {
        for (int s = 0; s < total; ++s)
            if (f.parent[s] == -2)
                throw ValidationError("feeder: node " + std::to_string(f.node_ids[s]) +
                                      " is not connected to the head");
    }

    f.load.assign(total, Complex(0.0, 0.0));
    if (doc.contains("loads")) {
        if (!doc.at("loads").is_array()) throw ParseError("feeder: 'loads' must be an array");
        int ld = 0;
        for (const auto& l : doc.at("loads")) {
            const std::string ctx = "loads[" + std::to_string(ld++) + "]";
            const NodeId id = require_int(l, "node", ctx);
            const double p_kw = require_number(l, "p_kw", ctx);
            const double q_kvar = require_number(l, "q_kvar", ctx);
            if (!f.slot_of.count(id)) throw ValidationError(ctx + ": unknown node " + std::to_string(id));
            const int s = f.slot_of.at(id);
            if (s == 0) throw ValidationError(ctx + ": the feeder head carries no load");
            f.load[s] += Complex(p_kw / f.base_kva, q_kvar / f.base_kva);
        }
    }

    if (doc.contains("ders")) {
        if (!doc.at("ders").is_array()) throw ParseError("feeder: 'ders' must be an array");
        int di = 0;
        for (const auto& d : doc.at("ders")) {
            const std::string ctx = "ders[" + std::to_string(di++) + "]";
            const NodeId id = require_int(d, "node", ctx);
            const double cap_kva = require_number(d, "capacity_kva", ctx);
            if (cap_kva <= 0.0) throw ValidationError(ctx + ": capacity_kva must be > 0");
            if (!f.slot_of.count(id)) throw ValidationError(ctx + ": unknown node " + std::to_string(id));
            const int s = f.slot_of.at(id);
            if (s == 0) throw ValidationError(ctx + ": the feeder head carries no DER");
            if (f.der_capacity_pu.count(s)) throw ValidationError(ctx + ": duplicate DER at node " + std::to_string(id));
            f.der_capacity_pu[s] = cap_kva / f.base_kva;
            f.der_slots.push_back(s);
        }
        std::sort(f.der_slots.begin(), f.der_slots.end());
    }

    if (doc.contains("measured_nodes")) {
        if (!doc.at("measured_nodes").is_array()) throw ParseError("feeder: 'measured_nodes' must be an array");
        for (const auto& m : doc.at("measured_nodes")) {
            if (!m.is_number_integer()) throw ParseError("feeder: measured_nodes[] entries must be integers");
            const NodeId id = m.get<NodeId>();
            if (!f.slot_of.count(id)) throw ValidationError("measured_nodes: unknown node " + std::to_string(id));
            const int s = f.slot_of.at(id);
            if (s == 0) throw ValidationError("measured_nodes: the head is not a measured node");
            f.measured_slots.push_back(s);
        }
        std::sort(f.measured_slots.begin(), f.measured_slots.end());
        f.measured_slots.erase(std::unique(f.measured_slots.begin(), f.measured_slots.end()),
                               f.measured_slots.end());
    }

    return f;
}

FeederModel load_feeder_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feeder file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_feeder(ss.str());
    } catch (const Error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

PowerFlowSolution solve_power_flow(const FeederModel& feeder,
                                   const std::vector<Complex>& injection,
                                   double tol, int max_iter) {
    const int total = feeder.n() + 1;
    if (static_cast<int>(injection.size()) != total)
        throw DimensionError("solve_power_flow: injection vector must have " +
                             std::to_string(total) + " entries");
    if (tol <= 0.0) throw ValidationError("solve_power_flow: tol must be > 0");

    PowerFlowSolution sol;
    sol.voltage.assign(total, Complex(feeder.head_voltage_pu, 0.0));
    sol.branch_current.assign(total, Complex(0.0, 0.0));

    std::vector<Complex> inj_current(total);
    for (int it = 1; it <= max_iter; ++it) {
        sol.iterations = it;

        for (int s = 1; s < total; ++s) {
            const double vm = std::abs(sol.voltage[s]);
            if (vm < 1e-6) {
                sol.converged = false;
                sol.mismatch = std::numeric_limits<double>::infinity();
                return sol;  // voltage collapse, report as divergence
            }
            inj_current[s] = std::conj(injection[s] / sol.voltage[s]);
        }

        // Backward: aggregate the current each branch must deliver to its subtree.
        for (auto rit = feeder.order.rbegin(); rit != feeder.order.rend(); ++rit) {
            const int s = *rit;
            if (s == 0) continue;
            Complex j = -inj_current[s];
            for (int c : feeder.children[s]) j += sol.branch_current[c];
            sol.branch_current[s] = j;
        }

        // Forward: apply the voltage drop along every line, head first.
        for (int s : feeder.order) {
            if (s == 0) continue;
            sol.voltage[s] = sol.voltage[feeder.parent[s]] - feeder.line_z[s] * sol.branch_current[s];
        }

        double worst = 0.0;
        for (int s = 1; s < total; ++s) {
            const Complex implied = sol.voltage[s] * std::conj(inj_current[s]);
            worst = std::max(worst, std::abs(injection[s] - implied));
        }
        sol.mismatch = worst;
        if (worst < tol) {
            sol.converged = true;
            break;
        }
    }

    Complex head(0.0, 0.0);
    for (int c : feeder.children[0])
        head += sol.voltage[0] * std::conj(sol.branch_current[c]);
    sol.head_power = head;
    return sol;
}

std::vector<Complex> net_injection(const FeederModel& feeder,
                                   std::span<const DerDispatch> der_setpoints) {
    const int total = feeder.n() + 1;
    std::vector<Complex> inj(total, Complex(0.0, 0.0));
    for (int s = 1; s < total; ++s) inj[s] = -feeder.load[s];

    std::vector<bool> seen(total, false);
    for (const auto& d : der_setpoints) {
        const int s = feeder.slot(d.node);
        if (!feeder.has_der(s))
            throw ValidationError("net_injection: node " + std::to_string(d.node) +
                                  " carries no DER");
        if (seen[s])
            throw ValidationError("net_injection: duplicate setpoint for node " +
                                  std::to_string(d.node));
        seen[s] = true;
        inj[s] += Complex(d.p_pu, d.q_pu);
    }
    for (int s : feeder.der_slots)
        if (!seen[s])
            throw ValidationError("net_injection: missing setpoint for DER node " +
                                  std::to_string(feeder.node_ids[s]));
    return inj;
}

} // namespace dergrid
