#pragma once
// Lowering of chemical programs (and planned pathways) onto a hardware
// graph: vessel allocation, liquid routes, inserted cleaning, pump strokes,
// and execution of the lowered plan on a machine whose cells are nodes.

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemputer/cstm.hpp"
#include "chemputer/graph.hpp"
#include "chemputer/program.hpp"
#include "chemputer/rules.hpp"

namespace chemputer::chempiler {

enum class FindingKind { MissingCapability, NoRoute, CapacityExceeded, VesselClassExhausted, ParamOutOfRange };
std::string_view to_string(FindingKind k);

struct Finding {
    FindingKind kind = FindingKind::MissingCapability;
    std::string subject;  // vessel, node or parameter concerned
    std::string detail;
    int op_index = -1;

    bool operator==(const Finding&) const = default;
};

struct FeasibilityReport {
    std::vector<Finding> findings;
    bool ok() const { return findings.empty(); }
    bool has(FindingKind k) const;
};

using ValidationReport = FeasibilityReport;

/// Parameter ranges plus every hardware requirement the graph cannot meet.
/// Empty exactly when the program's vessels and routes fit the graph.
ValidationReport validate_program(const ChemProgram& prog, const HardwareGraph& graph);

struct Transfer {
    int op_index = -1;
    int prim_index = -1;
    std::string src;
    std::string dst;
    std::vector<std::string> route;
    double amount_mol = 0.0;
    double volume_ml = 0.0;
    int strokes = 1;

    bool operator==(const Transfer&) const = default;
};

struct CleanInsertion {
    int before_op = -1;
    int before_prim = -1;
    std::string node;
    std::string vessel;
    double amount_mol = 0.0;

    bool operator==(const CleanInsertion&) const = default;
};

struct ClassUsage {
    int used = 0;
    int available = 0;
    bool operator==(const ClassUsage&) const = default;
};

inline constexpr double kCleanAmountMol = 0.05;

struct CompiledPlan {
    std::string pathway_ref;
    std::string graph_name;
    ChemProgram program;                           // the abstract program
    std::map<std::string, std::string> vessel_map;  // abstract vessel -> node id
    std::map<int, std::string> allocations;         // op index -> hosting node
    std::vector<Transfer> transfers;
    std::vector<CleanInsertion> cleaning;
    std::map<std::string, ClassUsage> vessel_classes;  // "V_R", "V_P", "V_O"
    std::map<std::string, double> peak_volume_ml;      // per node
    std::map<std::string, double> capacity_ml;         // per machine cell name
    ChemProgram lowered;                               // vessels renamed to nodes
    std::deque<cstm::PendingPrimitive> queue;

    bool operator==(const CompiledPlan&) const = default;
};

struct ChempileResult {
    std::optional<CompiledPlan> plan;
    FeasibilityReport report;
};

ChempileResult chempile(const ChemProgram& prog, const HardwareGraph& graph, const rules::RuleDatabase& db);
ChempileResult chempile(const rules::Pathway& pathway, const rules::RuleDatabase& db, const HardwareGraph& graph);

/// Builds the machine a plan runs on (tape cells are graph nodes).
cstm::MachineState plan_machine(const CompiledPlan& plan, const rules::RuleDatabase& db, std::uint64_t budget);

cstm::RunResult execute_plan(const CompiledPlan& plan, const rules::RuleDatabase& db,
                             std::uint64_t budget = cstm::kDefaultBudget * 10);

/// Program encoding of a planned pathway: one reactor reused across steps,
/// intermediates parked in storage, target sent to product.
ChemProgram pathway_program(const rules::Pathway& pathway, const rules::RuleDatabase& db);

struct Equivalence {
    bool equivalent = false;
    std::size_t compared = 0;
    std::string detail;
};

/// Compares the vessel-content sequence and halt kind of an abstract run
/// against a compiled run, ignoring transfer, cleaning and stroke records.
Equivalence lowering_equivalent(const cstm::ExecutionTrace& abstract_run, const cstm::ExecutionTrace& compiled_run);

/// Directed path whose interior nodes are all flow-through.
bool route_valid(const HardwareGraph& graph, const std::vector<std::string>& route);

std::string plan_to_json(const CompiledPlan& plan);
std::string report_to_json(const FeasibilityReport& report);

}  // namespace chemputer::chempiler
