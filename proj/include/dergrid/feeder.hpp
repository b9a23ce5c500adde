#pragma once

#include <complex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dergrid/errors.hpp"

namespace dergrid {

using Complex = std::complex<double>;
using NodeId = int;

// DER dispatch request at one node, per-unit.
struct DerDispatch {
    NodeId node = 0;
    double p_pu = 0.0;
    double q_pu = 0.0;
};

// Radial distribution feeder. Node ids come from the input document; id 0 is
// the feeder head. Internally every per-node quantity is stored densely in
// "slot" order, slot 0 = head, and all electrical quantities are per-unit on
// (base_kva, base_kv).
struct FeederModel {
    double base_kva = 0.0;
    double base_kv = 0.0;
    double head_voltage_pu = 1.0;

    std::vector<NodeId> node_ids;             // slot -> id, node_ids[0] == 0
    std::unordered_map<NodeId, int> slot_of;  // id -> slot

    std::vector<int> parent;                  // slot -> parent slot, parent[0] == -1
    std::vector<std::vector<int>> children;   // slot -> child slots
    std::vector<int> order;                   // slots in parent-before-child order
    std::vector<Complex> line_z;              // slot -> impedance of line parent->slot, [0] unused
    std::vector<Complex> load;                // slot -> P + jQ consumed, [0] == 0

    std::vector<int> der_slots;               // sorted slots carrying a DER
    std::unordered_map<int, double> der_capacity_pu;  // slot -> S_i
    std::vector<int> measured_slots;          // sorted slots with a voltage meter

    int n() const { return static_cast<int>(node_ids.size()) - 1; }

    bool has_der(int slot) const { return der_capacity_pu.count(slot) != 0; }

    int slot(NodeId id) const {
        auto it = slot_of.find(id);
        if (it == slot_of.end())
            throw ValidationError("unknown node id " + std::to_string(id));
        return it->second;
    }
};

struct PowerFlowSolution {
    std::vector<Complex> voltage;        // slot-indexed phasors, [0] = head
    std::vector<Complex> branch_current; // current flowing parent->slot, [0] == 0
    Complex head_power;                  // P0 + jQ0 entering the root lines
    int iterations = 0;
    bool converged = false;
    double mismatch = 0.0;               // worst per-node complex power mismatch
};

// Parses and validates a feeder-definition JSON document. Impedances arrive in
// ohms and loads/capacities in kW/kvar/kVA; everything is converted to
// per-unit here. Throws ParseError / ValidationError with field context.
FeederModel parse_feeder(const std::string& json_text);

// parse_feeder applied to the contents of a file; errors name the path.
FeederModel load_feeder_file(const std::string& path);

// Backward/forward sweep solver. `injection` is the per-slot net complex power
// fed into the grid (generation positive), slot 0 ignored. Convergence means
// the worst per-node complex power mismatch dropped under `tol` within
// `max_iter` sweeps; otherwise the last iterate is returned with
// converged=false. A collapsing voltage magnitude is reported as divergence.
PowerFlowSolution solve_power_flow(const FeederModel& feeder,
                                   const std::vector<Complex>& injection,
                                   double tol = 1e-8, int max_iter = 100);

// Net nodal injection from loads and DER setpoints:
//   S_n = -load_n                      for n without DER
//   S_n = (P_n + jQ_n) - load_n        for n in the DER set
// Setpoints must cover exactly the DER nodes.
std::vector<Complex> net_injection(const FeederModel& feeder,
                                   std::span<const DerDispatch> der_setpoints);

} // namespace dergrid
