#include "chemputer/cstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "chemputer/rng.hpp"

namespace chemputer::cstm {

std::string_view to_string(CellState s) {
    switch (s) {
        case CellState::Empty: return "empty";
        case CellState::Filled: return "filled";
        case CellState::Active: return "active";
    }
    return "?";
}

std::string_view to_string(Move m) {
    switch (m) {
        case Move::Left: return "L";
        case Move::Right: return "R";
        case Move::N: return "N";
    }
    return "?";
}

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::Program: return "program";
        case Origin::Clean: return "clean";
        case Origin::Stroke: return "stroke";
        case Origin::Dec: return "dec";
    }
    return "?";
}

std::string_view to_string(RecordKind k) {
    switch (k) {
        case RecordKind::Primitive: return "primitive";
        case RecordKind::Transition: return "transition";
        case RecordKind::Move: return "move";
        case RecordKind::Sensing: return "sensing";
        case RecordKind::Deviation: return "deviation";
        case RecordKind::Action: return "action";
        case RecordKind::Checkpoint: return "checkpoint";
    }
    return "?";
}

const VesselCell* MachineState::cell(const std::string& name) const {
    auto it = cell_index.find(name);
    return it == cell_index.end() ? nullptr : &tape[static_cast<std::size_t>(it->second)];
}

namespace {

double molar_mass(const std::string& species, const rules::RuleDatabase* db) {
    if (species == kCleanSolvent) return kCleanSolventMolarMass;
    return db ? db->molar_mass_or(species, kDefaultMolarMass) : kDefaultMolarMass;
}

double mass_g(const Multiset& m, const rules::RuleDatabase* db) {
    double g = 0.0;
    for (const auto& [sp, mol] : m) g += mol * molar_mass(sp, db);
    return g;
}

VesselCell& ensure_cell(MachineState& s, const std::string& name) {
    if (name.empty()) throw UnknownDestination("primitive names no vessel");
    auto it = s.cell_index.find(name);
    if (it != s.cell_index.end()) return s.tape[static_cast<std::size_t>(it->second)];
    VesselCell c;
    c.index = static_cast<int>(s.tape.size());
    c.name = name;
    s.cell_index[name] = c.index;
    s.tape.push_back(std::move(c));
    return s.tape.back();
}

void settle(VesselCell& c) {
    if (c.contents.empty()) {
        c.state = CellState::Empty;
        c.temperature = kAmbientTemp;
        c.pending = {};
    } else if (c.state == CellState::Empty) {
        c.state = CellState::Filled;
    }
}

/// Removes the selected part of `from` and returns it.
Multiset take(Multiset& from, const Selector& sel, const std::optional<Quantity>& amount,
              const std::optional<double>& fraction, const std::set<std::string>& solvents,
              const rules::RuleDatabase* db, const std::string& where) {
    Multiset selected;
    switch (sel.kind) {
        case Selector::Kind::All: selected = from; break;
        case Selector::Kind::Species:
            if (amount_of(from, sel.species) <= 0.0) {
                throw InsufficientMaterial("no " + sel.species + " in " + where);
            }
            selected[sel.species] = from.at(sel.species);
            break;
        case Selector::Kind::Solvents:
            for (const auto& [sp, a] : from) {
                if (solvents.count(sp)) selected[sp] = a;
            }
            break;
    }
    if (selected.empty()) {
        if (amount) throw InsufficientMaterial("nothing to move from " + where);
        return {};
    }
    double factor = fraction.value_or(1.0);
    if (amount) {
        double have = amount->unit == Unit::Mol ? total_amount(selected) : mass_g(selected, db);
        if (amount->value > have * (1.0 + 1e-12)) {
            throw InsufficientMaterial("requested " + format_double(amount->value) + " " +
                                       std::string(to_string(amount->unit)) + " but " + where + " holds " +
                                       format_double(have));
        }
        factor = std::min(1.0, amount->value / have);
    }
    Multiset moved;
    for (const auto& [sp, a] : selected) {
        if (factor >= 1.0) {
            moved[sp] = a;
            from.erase(sp);
        } else {
            double m = a * factor;
            if (m <= 0.0) continue;
            moved[sp] = m;
            remove_amount(from, sp, m);
        }
    }
    return moved;
}

void deposit(Multiset& into, const Multiset& moved) {
    for (const auto& [sp, a] : moved) add_amount(into, sp, a);
}

void check_capacity(const MachineState& s, const VesselCell& c, const rules::RuleDatabase* db) {
    auto it = s.capacity_ml.find(c.name);
    if (it == s.capacity_ml.end()) return;
    double v = volume_ml(c.contents, db);
    if (v > it->second * (1.0 + 1e-9)) {
        throw MachineError("capacity exceeded at " + c.name + ": " + format_double(v) + " mL > " +
                           format_double(it->second) + " mL");
    }
}

HaltState make_halt(const MachineState& s, rules::HaltKind kind, std::string reason) {
    (void)s;
    return HaltState{kind, std::move(reason), {}};
}

int rank(rules::HaltKind k) {
    switch (k) {
        case rules::HaltKind::Out: return 0;
        case rules::HaltKind::UOut: return 1;
        case rules::HaltKind::NOut: return 2;
        case rules::HaltKind::Fail: return 3;
    }
    return 3;
}

}  // namespace

double to_mol(const Quantity& q, const std::string& species, const rules::RuleDatabase* db) {
    switch (q.unit) {
        case Unit::Mol: return q.value;
        case Unit::Gram:
        case Unit::Millilitre: return q.value / molar_mass(species, db);
        default: throw PreconditionError("quantity is not an amount of matter");
    }
}

double volume_ml(const Multiset& m, const rules::RuleDatabase* db) { return mass_g(m, db); }

CellSnapshot snapshot(const VesselCell& c) {
    return CellSnapshot{c.index, c.name, c.state, c.contents, c.temperature, c.energy_input};
}

MachineState init_machine(const ChemProgram& prog, std::uint64_t budget, const rules::RuleDatabase* db) {
    MachineState s;
    s.budget = budget;
    ensure_cell(s, kWasteVessel);
    ensure_cell(s, kProductVessel);
    for (const auto& r : prog.reagents) {
        const std::string& v = r.source_vessel;
        if (v == kWasteVessel || v == kProductVessel) {
            throw DuplicateVessel("reagent '" + r.id + "' is stored in built-in vessel '" + v + "'");
        }
        if (prog.find_hardware(v)) {
            throw DuplicateVessel("vessel '" + v + "' is both a reagent source and a process vessel");
        }
        if (!(r.amount.value > 0.0)) throw PreconditionError("reagent '" + r.id + "' has no stock");
        VesselCell& c = ensure_cell(s, v);
        double mol = to_mol(r.amount, r.species, db);
        add_amount(c.contents, r.species, mol);
        add_amount(s.ledger.in, r.species, mol);
        settle(c);
        s.reagents[r.id] = {r.species, v};
        s.reagent_alphabet.insert(r.species);
        if (r.role == ReagentRole::Solvent) s.solvents.insert(r.species);
    }
    s.solvents.insert(kCleanSolvent);
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        const auto& op = prog.steps[i];
        s.process_alphabet.insert(std::string(to_string(op.kind)));
        auto prims = expand_unit_op(op);
        for (std::size_t j = 0; j < prims.size(); ++j) {
            PendingPrimitive p;
            p.prim = prims[j];
            p.origin = Origin::Program;
            p.op_index = static_cast<int>(i);
            p.prim_index = static_cast<int>(j);
            p.op_kind = op.kind;
            p.label = prims[j].vessel;
            s.pending.push_back(std::move(p));
        }
    }
    return s;
}

Multiset apply_primitive(MachineState& s, const Primitive& prim, const rules::RuleDatabase* db) {
    const int idx = ensure_cell(s, prim.vessel).index;
    s.head = idx;
    auto cell = [&]() -> VesselCell& { return s.tape[static_cast<std::size_t>(idx)]; };
    Multiset moved;

    switch (prim.kind) {
        case PrimitiveKind::AM: {
            const Endpoint& src = prim.counterpart;
            switch (src.kind) {
                case Endpoint::Kind::Reagent: {
                    auto it = s.reagents.find(src.name);
                    if (it == s.reagents.end()) throw UnknownDestination("unknown reagent '" + src.name + "'");
                    const int sidx = ensure_cell(s, it->second.vessel).index;
                    VesselCell& from = s.tape[static_cast<std::size_t>(sidx)];
                    moved = take(from.contents, Selector::of(it->second.species), prim.amount, prim.fraction,
                                 s.solvents, db, from.name);
                    settle(from);
                    break;
                }
                case Endpoint::Kind::Vessel: {
                    if (src.name == prim.vessel) throw UnknownDestination("AM source equals target " + src.name);
                    const int sidx = ensure_cell(s, src.name).index;
                    VesselCell& from = s.tape[static_cast<std::size_t>(sidx)];
                    moved = take(from.contents, prim.select, prim.amount, prim.fraction, s.solvents, db, from.name);
                    settle(from);
                    break;
                }
                case Endpoint::Kind::Line:
                    moved = s.line;
                    s.line.clear();
                    break;
                case Endpoint::Kind::Reservoir: {
                    if (!prim.amount) throw PreconditionError("reservoir supply needs an amount");
                    double mol = to_mol(*prim.amount, src.name, db);
                    if (mol > 0.0) moved[src.name] = mol;
                    deposit(s.ledger.in, moved);
                    break;
                }
                case Endpoint::Kind::None: throw UnknownDestination("AM without a source");
            }
            deposit(cell().contents, moved);
            for (const auto& [sp, _] : moved) s.reagent_alphabet.insert(sp);
            settle(cell());
            break;
        }
        case PrimitiveKind::SM: {
            const Endpoint& dst = prim.counterpart;
            if (dst.kind == Endpoint::Kind::Vessel && (dst.name.empty() || dst.name == prim.vessel)) {
                throw UnknownDestination("SM from " + prim.vessel + " has no valid destination");
            }
            if (dst.kind != Endpoint::Kind::Vessel && dst.kind != Endpoint::Kind::Line) {
                throw UnknownDestination("SM destination must be a vessel or the line");
            }
            moved = take(cell().contents, prim.select, prim.amount, prim.fraction, s.solvents, db, cell().name);
            settle(cell());
            if (dst.kind == Endpoint::Kind::Line) {
                deposit(s.line, moved);
            } else {
                const int didx = ensure_cell(s, dst.name).index;
                VesselCell& to = s.tape[static_cast<std::size_t>(didx)];
                deposit(to.contents, moved);
                settle(to);
                check_capacity(s, to, db);
            }
            break;
        }
        case PrimitiveKind::AE:
        case PrimitiveKind::SE: {
            VesselCell& c = cell();
            if (prim.setpoint) {
                double delta = *prim.setpoint - c.temperature;
                c.temperature = *prim.setpoint;
                if (prim.kind == PrimitiveKind::AE) {
                    c.energy_input += std::abs(delta);
                } else {
                    c.energy_input = std::max(0.0, c.energy_input - std::abs(delta));
                }
            }
            if (prim.reactive) {
                c.pending.temp = c.temperature;
                c.pending.duration = prim.duration;
                if (!c.contents.empty()) c.state = CellState::Active;
            }
            break;
        }
    }
    check_capacity(s, cell(), db);
    return moved;
}

TraceRecord apply_rule(MachineState& s, const rules::RuleDatabase& db, const std::string& vessel,
                       const std::string& rule_id, double extent, double yield_factor, Origin origin) {
    const auto* rule = db.find_rule(rule_id);
    if (!rule) throw rules::RulesError("unknown rule '" + rule_id + "'");
    VesselCell& c = ensure_cell(s, vessel);
    TraceRecord r;
    r.kind = RecordKind::Transition;
    r.origin = origin;
    r.vessel = c.name;
    r.label = c.name;
    r.rule_id = rule_id;
    r.before = snapshot(c);
    const double y = std::clamp(rule->yield * yield_factor, 0.0, 1.0);
    const double n = y * extent;
    if (n > 0.0) {
        for (const auto& [sp, coef] : rule->reagents) {
            double a = std::min(coef * n, amount_of(c.contents, sp));
            if (a <= 0.0) continue;
            if (a >= amount_of(c.contents, sp)) {
                c.contents.erase(sp);
            } else {
                remove_amount(c.contents, sp, a);
            }
            add_amount(s.ledger.consumed, sp, a);
        }
        for (const auto& k : rule->catalysts) {
            double a = amount_of(c.contents, k);
            add_amount(s.ledger.consumed, k, a);
            add_amount(s.ledger.produced, k, a);
        }
        for (const auto& [sp, coef] : rule->products) {
            add_amount(c.contents, sp, coef * n);
            add_amount(s.ledger.produced, sp, coef * n);
            r.moved[sp] = coef * n;
        }
        if (!rule->byproduct.empty()) {
            add_amount(s.tape[0].contents, rule->byproduct, n);
            add_amount(s.ledger.produced, rule->byproduct, n);
            settle(s.tape[0]);
        }
    }
    c.state = CellState::Empty;
    settle(c);
    c.pending = {};
    r.after = snapshot(c);
    r.info["extent"] = format_double(extent);
    r.info["yield_factor"] = format_double(yield_factor);
    return r;
}

StepResult step(MachineState& s, rules::RuleDatabase& db, const StepOptions& opts) {
    if (s.halt) throw PreconditionError("machine has already halted");
    StepResult out;
    auto halt = [&](rules::HaltKind kind, std::string reason) {
        s.halt = make_halt(s, kind, std::move(reason));
        s.controller = std::string(rules::to_string(kind));
        out.halt = s.halt;
        return out;
    };

    if (!s.reacting && s.pending.empty()) {
        rules::HaltKind kind = s.reactions > 0 && s.outcome ? *s.outcome : rules::HaltKind::Out;
        return halt(kind, "completed");
    }
    if (s.step_count >= s.budget) return halt(rules::HaltKind::Fail, "budget_exhausted");

    const std::string& target_name = s.reacting ? s.reacting->prim.vessel : s.pending.front().prim.vessel;
    int target;
    try {
        target = ensure_cell(s, target_name).index;
    } catch (const MachineError& e) {
        return halt(rules::HaltKind::Fail, e.what());
    }

    TraceRecord rec;
    if (target != s.head) {
        VesselCell& from = s.tape[static_cast<std::size_t>(s.head)];
        rec.kind = RecordKind::Move;
        rec.vessel = from.name;
        rec.before = snapshot(from);
        rec.move = target > s.head ? Move::Right : Move::Left;
        s.head += target > s.head ? 1 : -1;
        rec.after = snapshot(s.tape[static_cast<std::size_t>(s.head)]);
        rec.label = rec.after.vessel;
        rec.step = ++s.step_count;
        s.controller = "q_run";
        out.record = std::move(rec);
        return out;
    }

    if (s.reacting) {
        PendingPrimitive react = *s.reacting;
        s.reacting.reset();
        VesselCell& c = s.tape[static_cast<std::size_t>(target)];
        const rules::ProcessPoint point = c.pending;
        auto match = rules::match_rule(db, c.contents, point);
        std::string found_by;
        if (!match && opts.explore && opts.latent && opts.rng) {
            if (auto ex = rules::explore(*opts.latent, c.contents, point, *opts.rng)) {
                if (!db.find_rule(ex->rule.id)) db = db.with_rule(ex->rule, opts.latent);
                const auto* rule = db.find_rule(ex->rule.id);
                rules::RuleMatch m{rule->id, std::numeric_limits<double>::infinity(), {}};
                for (const auto& [sp, coef] : rule->reagents) {
                    double e = amount_of(c.contents, sp) / coef;
                    if (e < m.extent) {
                        m.extent = e;
                        m.limiting = sp;
                    }
                }
                match = m;
                found_by = "exploration";
            }
        }
        if (!match) {
            rec.kind = RecordKind::Transition;
            rec.origin = react.origin;
            rec.vessel = c.name;
            rec.label = react.label;
            rec.op_index = react.op_index;
            rec.prim_index = react.prim_index;
            rec.op_kind = react.op_kind;
            rec.before = snapshot(c);
            c.state = CellState::Filled;
            c.pending = {};
            settle(c);
            rec.after = snapshot(c);
            rec.info["outcome"] = "q_fail";
            rec.step = ++s.step_count;
            out.record = std::move(rec);
            s.halt = make_halt(s, rules::HaltKind::Fail, "no_matching_rule at " + c.name);
            s.controller = "q_fail";
            out.halt = s.halt;
            return out;
        }
        const double factor = s.next_yield_factor;
        s.next_yield_factor = 1.0;
        rec = apply_rule(s, db, c.name, match->rule_id, match->extent, factor, react.origin);
        rec.label = react.label;
        rec.op_index = react.op_index;
        rec.prim_index = react.prim_index;
        rec.op_kind = react.op_kind;
        rec.info["limiting"] = match->limiting;
        if (!found_by.empty()) rec.info["found_by"] = found_by;
        db = rules::promote(db, match->rule_id);
        auto kind = rules::classify_outcome(match, db, opts.explore);
        rec.info["outcome"] = std::string(rules::to_string(kind));
        ++s.reactions;
        if (!s.outcome || rank(kind) > rank(*s.outcome)) s.outcome = kind;
        rec.step = ++s.step_count;
        s.controller = "q_run";
        out.record = std::move(rec);
        return out;
    }

    PendingPrimitive p = s.pending.front();
    VesselCell& c = s.tape[static_cast<std::size_t>(target)];
    rec.kind = RecordKind::Primitive;
    rec.origin = p.origin;
    rec.op_index = p.op_index;
    rec.prim_index = p.prim_index;
    rec.op_kind = p.op_kind;
    rec.vessel = c.name;
    rec.label = p.label;
    rec.primitive = p.prim;
    rec.before = snapshot(c);
    MachineState rollback = s;
    try {
        rec.moved = apply_primitive(s, p.prim, &db);
    } catch (const MachineError& e) {
        s = std::move(rollback);
        return halt(rules::HaltKind::Fail, e.what());
    }
    s.pending.pop_front();
    rec.after = snapshot(s.tape[static_cast<std::size_t>(target)]);
    if (p.prim.reactive) {
        if (rec.after.state == CellState::Active) {
            s.reacting = p;
        } else {
            rec.step = ++s.step_count;
            out.record = std::move(rec);
            s.halt = make_halt(s, rules::HaltKind::Fail, "nothing to transform in " + c.name);
            s.controller = "q_fail";
            out.halt = s.halt;
            return out;
        }
    }
    rec.step = ++s.step_count;
    s.controller = "q_run";
    out.record = std::move(rec);
    return out;
}

RunResult run_machine(MachineState state, const rules::RuleDatabase& db, const RunOptions& opts) {
    RunResult res;
    res.db = db;
    Rng rng(derive_seed(opts.seed, "explore"));
    StepOptions so{opts.explore, opts.latent, &rng};
    for (;;) {
        StepResult r = step(state, res.db, so);
        if (r.record) res.trace.records.push_back(std::move(*r.record));
        if (r.halt) break;
    }
    res.trace.halt = *state.halt;
    res.trace.final_state = std::move(state);
    return res;
}

RunResult run(const ChemProgram& prog, const rules::RuleDatabase& db, std::uint64_t budget, const RunOptions& opts) {
    MachineState state;
    std::string id = "trace-" + to_hex(fnv1a(prog.name, fnv1a(std::to_string(opts.seed))));
    try {
        state = init_machine(prog, budget, &db);
    } catch (const MachineError& e) {
        RunResult res;
        res.db = db;
        res.trace.id = id;
        res.trace.halt = HaltState{rules::HaltKind::Fail, e.what(), id};
        return res;
    }
    RunResult res = run_machine(std::move(state), db, opts);
    res.trace.id = id;
    res.trace.halt.trace_ref = id;
    res.trace.final_state.halt->trace_ref = id;
    return res;
}

LedgerReport mass_ledger(const MachineState& s) {
    LedgerReport rep;
    rep.total_in = s.ledger.in;
    rep.total_produced = s.ledger.produced;
    rep.total_consumed = s.ledger.consumed;
    for (std::size_t i = 0; i < s.tape.size(); ++i) {
        Multiset& into = i == 0 ? rep.total_waste : i == 1 ? rep.total_product : rep.total_held;
        deposit(into, s.tape[i].contents);
    }
    deposit(rep.total_held, s.line);
    std::set<std::string> species;
    for (const Multiset* m : {&rep.total_in, &rep.total_produced, &rep.total_consumed, &rep.total_held,
                              &rep.total_waste, &rep.total_product}) {
        for (const auto& [sp, _] : *m) species.insert(sp);
    }
    for (const auto& sp : species) {
        double source = amount_of(rep.total_in, sp) + amount_of(rep.total_produced, sp);
        double sink = amount_of(rep.total_held, sp) + amount_of(rep.total_waste, sp) +
                      amount_of(rep.total_product, sp) + amount_of(rep.total_consumed, sp);
        double r = std::abs(source - sink) / std::max(source, kTiny);
        if (rep.worst_species.empty() || r > rep.residual) {
            rep.residual = r;
            rep.worst_species = sp;
        }
    }
    return rep;
}

LedgerReport mass_ledger(const ExecutionTrace& trace) { return mass_ledger(trace.final_state); }

void instantiate_cell(MachineState& s, const std::string& vessel) {
    auto it = s.cell_index.find(vessel);
    if (it == s.cell_index.end()) throw UnknownDestination("no cell named '" + vessel + "'");
    VesselCell& c = s.tape[static_cast<std::size_t>(it->second)];
    if (!c.contents.empty()) throw CellStillFilled("cell '" + vessel + "' still holds material");
    c.state = CellState::Empty;
    c.temperature = kAmbientTemp;
    c.energy_input = 0.0;
    c.pending = {};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using ojson = nlohmann::ordered_json;

ojson multiset_json(const Multiset& m) {
    ojson j = ojson::object();
    for (const auto& [sp, a] : m) j[sp] = format_double(a);
    return j;
}

ojson snapshot_json(const CellSnapshot& c) {
    ojson j;
    j["index"] = c.index;
    j["vessel"] = c.vessel;
    j["state"] = std::string(to_string(c.state));
    j["contents"] = multiset_json(c.contents);
    j["temperature"] = format_double(c.temperature);
    j["energy"] = format_double(c.energy_input);
    return j;
}

std::string endpoint_text(const Endpoint& e) {
    switch (e.kind) {
        case Endpoint::Kind::None: return "";
        case Endpoint::Kind::Vessel: return "vessel:" + e.name;
        case Endpoint::Kind::Reagent: return "reagent:" + e.name;
        case Endpoint::Kind::Line: return "line";
        case Endpoint::Kind::Reservoir: return "reservoir:" + e.name;
    }
    return "";
}

ojson primitive_json(const Primitive& p) {
    ojson j;
    j["kind"] = std::string(to_string(p.kind));
    j["vessel"] = p.vessel;
    if (p.counterpart.kind != Endpoint::Kind::None) j["counterpart"] = endpoint_text(p.counterpart);
    if (p.select.kind == Selector::Kind::Species) j["select"] = p.select.species;
    if (p.select.kind == Selector::Kind::Solvents) j["select"] = "solvents";
    if (p.amount) j["amount"] = format_double(p.amount->value) + " " + std::string(to_string(p.amount->unit));
    if (p.fraction) j["fraction"] = format_double(*p.fraction);
    if (p.setpoint) j["setpoint"] = format_double(*p.setpoint);
    if (p.duration > 0) j["duration"] = format_double(p.duration);
    if (p.reactive) j["reactive"] = true;
    return j;
}

ojson record_ojson(const TraceRecord& r) {
    ojson j;
    j["step"] = r.step;
    j["kind"] = std::string(to_string(r.kind));
    j["origin"] = std::string(to_string(r.origin));
    if (r.op_index >= 0) j["op"] = r.op_index;
    if (r.prim_index >= 0) j["prim"] = r.prim_index;
    if (r.op_kind) j["op_kind"] = std::string(to_string(*r.op_kind));
    j["vessel"] = r.vessel;
    if (r.label != r.vessel) j["label"] = r.label;
    j["move"] = std::string(to_string(r.move));
    if (r.primitive) j["primitive"] = primitive_json(*r.primitive);
    if (!r.rule_id.empty()) j["rule"] = r.rule_id;
    if (!r.moved.empty()) j["moved"] = multiset_json(r.moved);
    j["before"] = snapshot_json(r.before);
    j["after"] = snapshot_json(r.after);
    if (!r.info.empty()) {
        ojson info = ojson::object();
        for (const auto& [k, v] : r.info) info[k] = v;
        j["info"] = info;
    }
    return j;
}

}  // namespace

std::string record_to_json(const TraceRecord& r) { return record_ojson(r).dump(); }

std::string trace_to_jsonl(const ExecutionTrace& trace) {
    std::string out;
    for (const auto& r : trace.records) {
        out += record_to_json(r);
        out += '\n';
    }
    LedgerReport led = mass_ledger(trace);
    ojson fin;
    fin["halt"] = {{"kind", std::string(rules::to_string(trace.halt.kind))},
                   {"reason", trace.halt.reason},
                   {"trace_ref", trace.halt.trace_ref}};
    fin["step_count"] = trace.final_state.step_count;
    ojson l;
    l["residual"] = format_double(led.residual);
    l["in"] = multiset_json(led.total_in);
    l["produced"] = multiset_json(led.total_produced);
    l["consumed"] = multiset_json(led.total_consumed);
    l["held"] = multiset_json(led.total_held);
    l["waste"] = multiset_json(led.total_waste);
    l["product"] = multiset_json(led.total_product);
    fin["ledger"] = l;
    out += fin.dump();
    out += '\n';
    return out;
}

}  // namespace chemputer::cstm
