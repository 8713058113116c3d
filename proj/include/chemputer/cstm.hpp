#pragma once
// The chemical synthesis machine: a tape of vessel cells under a single
// head, driven by the four primitives, with transformations supplied by a
// rule database and mass/energy ledgers kept at every step.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chemputer/primitives.hpp"
#include "chemputer/program.hpp"
#include "chemputer/rules.hpp"

namespace chemputer::cstm {

enum class CellState { Empty, Filled, Active };
std::string_view to_string(CellState s);

enum class Move { Left, Right, N };
std::string_view to_string(Move m);

struct VesselCell {
    int index = 0;
    std::string name;
    CellState state = CellState::Empty;
    Multiset contents;
    double temperature = kAmbientTemp;
    double energy_input = 0.0;
    /// Condition point accumulated for a pending transformation.
    rules::ProcessPoint pending;

    bool operator==(const VesselCell&) const = default;
};

enum class Origin { Program, Clean, Stroke, Dec };
std::string_view to_string(Origin o);

/// A primitive waiting in the controller's program queue.
struct PendingPrimitive {
    Primitive prim;
    Origin origin = Origin::Program;
    int op_index = -1;
    int prim_index = -1;
    UnitOpKind op_kind = UnitOpKind::Add;
    /// Vessel name reported in the trace (the abstract vessel when lowered).
    std::string label;

    bool operator==(const PendingPrimitive&) const = default;
};

struct ReagentSource {
    std::string species;
    std::string vessel;

    bool operator==(const ReagentSource&) const = default;
};

/// Cumulative per-species bookkeeping. Held amounts are read off the tape.
struct Ledger {
    Multiset in;        // stock, reservoir supplies, revert credits
    Multiset produced;  // rule products, byproducts, re-emitted catalysts
    Multiset consumed;  // rule reagents and catalysts taken up

    bool operator==(const Ledger&) const = default;
};

struct HaltState {
    rules::HaltKind kind = rules::HaltKind::Fail;
    std::string reason;
    std::string trace_ref;

    bool operator==(const HaltState&) const = default;
};

struct MachineState {
    std::string controller = "q0";
    std::vector<VesselCell> tape;
    std::map<std::string, int> cell_index;
    int head = 0;
    std::set<std::string> reagent_alphabet;
    std::set<std::string> process_alphabet;
    Multiset line;  // material carried by the head between cells
    Ledger ledger;
    std::uint64_t step_count = 0;
    std::uint64_t budget = 0;

    std::deque<PendingPrimitive> pending;
    std::map<std::string, ReagentSource> reagents;
    std::set<std::string> solvents;
    /// Node capacities in mL for compiled machines; empty for abstract ones.
    std::map<std::string, double> capacity_ml;

    /// Reactive primitive whose cell is Active, awaiting its transformation.
    std::optional<PendingPrimitive> reacting;
    int reactions = 0;
    std::optional<rules::HaltKind> outcome;  // worst outcome so far
    std::optional<HaltState> halt;
    /// Multiplier on the yield of the next transformation (fault injection).
    double next_yield_factor = 1.0;

    const VesselCell* cell(const std::string& name) const;
    const Multiset& waste() const { return tape.at(0).contents; }
    const Multiset& product() const { return tape.at(1).contents; }

    bool operator==(const MachineState&) const = default;
};

class MachineError : public Error {
public:
    using Error::Error;
};
class InsufficientMaterial : public MachineError {
public:
    using MachineError::MachineError;
};
class UnknownDestination : public MachineError {
public:
    using MachineError::MachineError;
};
class CellStillFilled : public MachineError {
public:
    using MachineError::MachineError;
};
class DuplicateVessel : public MachineError {
public:
    using MachineError::MachineError;
};

inline constexpr std::uint64_t kDefaultBudget = 10000;
inline constexpr double kDefaultMolarMass = 100.0;  // g/mol for species outside the rule database
inline const std::string kCleanSolvent = "clean_solvent";
inline constexpr double kCleanSolventMolarMass = 18.0;

/// Converts a mol/g/mL quantity of `species` to mol.
double to_mol(const Quantity& q, const std::string& species, const rules::RuleDatabase* db);
/// Volume in mL of a multiset (density 1 g/mL).
double volume_ml(const Multiset& m, const rules::RuleDatabase* db);

/// Lays out the tape (waste, product, then source vessels in declaration
/// order), credits the initial stock and queues the expanded program.
MachineState init_machine(const ChemProgram& prog, std::uint64_t budget, const rules::RuleDatabase* db = nullptr);

/// Applies `prim` with the head on its cell. Throws InsufficientMaterial or
/// UnknownDestination. Returns the amounts moved (empty for AE/SE).
Multiset apply_primitive(MachineState& state, const Primitive& prim, const rules::RuleDatabase* db = nullptr);

struct CellSnapshot {
    int index = -1;
    std::string vessel;
    CellState state = CellState::Empty;
    Multiset contents;
    double temperature = kAmbientTemp;
    double energy_input = 0.0;

    bool operator==(const CellSnapshot&) const = default;
};

enum class RecordKind { Primitive, Transition, Move, Sensing, Deviation, Action, Checkpoint };
std::string_view to_string(RecordKind k);

struct TraceRecord {
    std::uint64_t step = 0;
    RecordKind kind = RecordKind::Primitive;
    Origin origin = Origin::Program;
    int op_index = -1;
    int prim_index = -1;
    std::optional<UnitOpKind> op_kind;
    std::string vessel;
    std::string label;
    Move move = Move::N;
    std::optional<Primitive> primitive;
    std::string rule_id;
    Multiset moved;
    CellSnapshot before;
    CellSnapshot after;
    /// Extra fields, values already formatted (halt outcome, readings, ...).
    std::map<std::string, std::string> info;

    bool operator==(const TraceRecord&) const = default;
};

struct LedgerReport {
    Multiset total_in;
    Multiset total_produced;
    Multiset total_consumed;
    Multiset total_held;  // process cells plus the line
    Multiset total_waste;
    Multiset total_product;
    double residual = 0.0;
    std::string worst_species;
};

struct ExecutionTrace {
    std::string id;
    std::vector<TraceRecord> records;
    HaltState halt;
    MachineState final_state;
};

/// Rule application options for the transition in a step.
struct StepOptions {
    bool explore = false;
    const rules::RuleDatabase* latent = nullptr;
    Rng* rng = nullptr;
};

struct StepResult {
    std::optional<TraceRecord> record;
    std::optional<HaltState> halt;
};

/// One machine step. `db` is replaced by its promoted successor when a rule
/// fires. Appends nothing when the machine halts without consuming a step.
StepResult step(MachineState& state, rules::RuleDatabase& db, const StepOptions& opts = {});

/// Applies `rule_id` at `vessel` for `extent` mol of applications scaled by
/// `yield_factor`, outside the normal step flow (used by corrections).
TraceRecord apply_rule(MachineState& state, const rules::RuleDatabase& db, const std::string& vessel,
                       const std::string& rule_id, double extent, double yield_factor, Origin origin);

struct RunOptions {
    bool explore = false;
    const rules::RuleDatabase* latent = nullptr;
    std::uint64_t seed = 0;
};

struct RunResult {
    ExecutionTrace trace;
    rules::RuleDatabase db;  // after promotions
};

RunResult run(const ChemProgram& prog, const rules::RuleDatabase& db, std::uint64_t budget = kDefaultBudget,
              const RunOptions& opts = {});

/// Drives an already initialised machine to its halt.
RunResult run_machine(MachineState state, const rules::RuleDatabase& db, const RunOptions& opts = {});

LedgerReport mass_ledger(const MachineState& state);
LedgerReport mass_ledger(const ExecutionTrace& trace);

/// Resets an offloaded cell for reuse. Throws CellStillFilled.
void instantiate_cell(MachineState& state, const std::string& vessel);

CellSnapshot snapshot(const VesselCell& cell);

/// JSON Lines: one record per line, final line halt + ledger.
std::string trace_to_jsonl(const ExecutionTrace& trace);
std::string record_to_json(const TraceRecord& r);

}  // namespace chemputer::cstm
