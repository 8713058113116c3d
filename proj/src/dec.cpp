#include "chemputer/dec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chemputer/chempiler.hpp"
#include "chemputer/json_util.hpp"

namespace chemputer::dec {

std::string_view to_string(SensorKind k) {
    switch (k) {
        case SensorKind::Photon: return "Photon";
        case SensorKind::Conductivity: return "Conductivity";
        case SensorKind::Temperature: return "Temperature";
        case SensorKind::Chromatograph: return "Chromatograph";
    }
    return "?";
}

std::string_view to_string(Observable o) {
    switch (o) {
        case Observable::YieldFraction: return "yield_fraction";
        case Observable::Purity: return "purity";
        case Observable::Temperature: return "temperature";
    }
    return "?";
}

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::None: return "none";
        case Severity::Minor: return "minor";
        case Severity::Intermediate: return "intermediate";
        case Severity::Major: return "major";
    }
    return "?";
}

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::Tune: return "tune";
        case ActionKind::Redose: return "redose";
        case ActionKind::Revert: return "revert";
        case ActionKind::Escalate: return "escalate";
    }
    return "?";
}

VesselView view_of(const cstm::MachineState& state, const std::string& vessel, std::optional<double> yield_fraction) {
    const auto* c = state.cell(vessel);
    if (!c) throw DecError("no vessel '" + vessel + "' on the tape");
    VesselView v;
    v.yield_fraction = yield_fraction;
    v.temperature = c->temperature;
    const double total = total_amount(c->contents);
    if (total > 0.0) {
        double top = 0.0;
        for (const auto& [_, a] : c->contents) top = std::max(top, a);
        v.purity = top / total;
    }
    return v;
}

double sample_sensor(const VesselView& view, const SensorModel& sensor, Rng& rng) {
    if (!(sensor.noise_sd >= 0.0)) throw DecError("sensor noise_sd must be >= 0");
    double truth = 0.0;
    switch (sensor.observable) {
        case Observable::YieldFraction:
            if (!view.yield_fraction) throw DecError("no transformation to read a yield from");
            truth = *view.yield_fraction;
            break;
        case Observable::Purity:
            if (!view.purity) throw DecError("purity of an empty vessel is undefined");
            truth = *view.purity;
            break;
        case Observable::Temperature: truth = view.temperature; break;
    }
    const double noise = rng.normal();
    return sensor.noise_sd == 0.0 ? truth : truth + sensor.noise_sd * noise;
}

double expected_yield(const rules::TransitionRule& rule, double elapsed, double duration) {
    if (!(duration > 0.0)) return rule.yield;
    return rule.yield * std::clamp(elapsed / duration, 0.0, 1.0);
}

void CorrectionPolicy::validate() const {
    if (!(0.0 < minor_threshold && minor_threshold < intermediate_threshold &&
          intermediate_threshold < major_threshold && major_threshold < 1.0)) {
        throw DecError("thresholds must satisfy 0 < minor < intermediate < major < 1");
    }
    if (max_tunes < 0 || max_redoses < 0 || max_reverts < 0) throw DecError("budgets must be >= 0");
    if (!(std::abs(tune_delta_temp) <= 10.0)) throw DecError("tune_delta_temp must be within 10 C");
    if (!(redose_fraction > 0.0 && redose_fraction <= 0.5)) throw DecError("redose_fraction must be in (0, 0.5]");
    if (!(extend_time >= 0.0)) throw DecError("extend_time must be >= 0");
    if (!(sensor_noise_sd >= 0.0)) throw DecError("sensor_noise_sd must be >= 0");
    for (const auto& [sev, _] : actions) {
        if (sev == Severity::None) throw DecError("no action can be bound to severity none");
    }
}

namespace {

ActionKind action_from_name(const std::string& s) {
    for (auto k : {ActionKind::Tune, ActionKind::Redose, ActionKind::Revert, ActionKind::Escalate}) {
        if (s == to_string(k)) return k;
    }
    throw DecError("unknown action '" + s + "'");
}

}  // namespace

CorrectionPolicy load_policy(const std::string& json_text) {
    using namespace jsonutil;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DecError(std::string("policy is not valid JSON: ") + e.what());
    }
    CorrectionPolicy p;
    try {
        require_object(j, "policy", {"enabled", "thresholds", "budgets", "actions", "sensing"}, {});
        if (j.contains("enabled")) p.enabled = get_bool(j, "enabled");
        if (j.contains("thresholds")) {
            const auto& t = j["thresholds"];
            require_object(t, "thresholds", {"minor", "intermediate", "major"}, {});
            if (t.contains("minor")) p.minor_threshold = get_number(t, "minor");
            if (t.contains("intermediate")) p.intermediate_threshold = get_number(t, "intermediate");
            if (t.contains("major")) p.major_threshold = get_number(t, "major");
        }
        if (j.contains("budgets")) {
            const auto& b = j["budgets"];
            require_object(b, "budgets", {"max_tunes", "max_redoses", "max_reverts"}, {});
            auto count = [&](const char* key, int& out) {
                if (!b.contains(key)) return;
                double v = get_number(b, key);
                if (v != std::floor(v)) throw DecError(std::string(key) + " must be an integer");
                out = static_cast<int>(v);
            };
            count("max_tunes", p.max_tunes);
            count("max_redoses", p.max_redoses);
            count("max_reverts", p.max_reverts);
        }
        if (j.contains("actions")) {
            const auto& a = j["actions"];
            require_object(a, "actions",
                           {"tune_delta_temp", "redose_fraction", "extend_time", "minor", "intermediate", "major"}, {});
            if (a.contains("tune_delta_temp")) p.tune_delta_temp = get_number(a, "tune_delta_temp");
            if (a.contains("redose_fraction")) p.redose_fraction = get_number(a, "redose_fraction");
            if (a.contains("extend_time")) p.extend_time = get_number(a, "extend_time");
            if (a.contains("minor")) p.actions[Severity::Minor] = action_from_name(get_string(a, "minor"));
            if (a.contains("intermediate")) {
                p.actions[Severity::Intermediate] = action_from_name(get_string(a, "intermediate"));
            }
            if (a.contains("major")) p.actions[Severity::Major] = action_from_name(get_string(a, "major"));
        }
        if (j.contains("sensing")) {
            const auto& s = j["sensing"];
            require_object(s, "sensing", {"sensor_noise_sd"}, {});
            if (s.contains("sensor_noise_sd")) p.sensor_noise_sd = get_number(s, "sensor_noise_sd");
        }
    } catch (const SchemaError& e) {
        throw DecError(e.what());
    }
    p.validate();
    return p;
}

std::string policy_to_json(const CorrectionPolicy& p) {
    nlohmann::ordered_json j;
    j["enabled"] = p.enabled;
    j["thresholds"] = {{"minor", p.minor_threshold}, {"intermediate", p.intermediate_threshold},
                       {"major", p.major_threshold}};
    j["budgets"] = {{"max_tunes", p.max_tunes}, {"max_redoses", p.max_redoses}, {"max_reverts", p.max_reverts}};
    j["actions"] = {{"tune_delta_temp", p.tune_delta_temp},
                    {"redose_fraction", p.redose_fraction},
                    {"extend_time", p.extend_time}};
    for (const auto& [sev, k] : p.actions) j["actions"][std::string(to_string(sev))] = std::string(to_string(k));
    j["sensing"] = {{"sensor_noise_sd", p.sensor_noise_sd}};
    return j.dump(2) + "\n";
}

double relative_gap(double observed, double expected) {
    return std::abs(observed - expected) / std::max(std::abs(expected), kTiny);
}

std::optional<Deviation> detect_deviation(double reading, double expected, const CorrectionPolicy& policy,
                                          std::uint64_t step_ref) {
    const double gap = relative_gap(reading, expected);
    if (gap < policy.minor_threshold) return std::nullopt;
    return Deviation{reading, expected, gap, step_ref};
}

Severity classify_gap(double gap, const CorrectionPolicy& policy) {
    if (gap >= policy.major_threshold) return Severity::Major;
    if (gap >= policy.intermediate_threshold) return Severity::Intermediate;
    if (gap >= policy.minor_threshold) return Severity::Minor;
    return Severity::None;
}

Severity classify_severity(const Deviation& dev, const CorrectionPolicy& policy) {
    return classify_gap(dev.relative_gap, policy);
}

Action corrective_action(Severity sev, const CorrectionPolicy& policy, const Budgets& used) {
    if (sev == Severity::None) throw PreconditionError("no correction for severity none");
    auto it = policy.actions.find(sev);
    Action a;
    a.kind = it == policy.actions.end() ? ActionKind::Escalate : it->second;
    switch (a.kind) {
        case ActionKind::Tune:
            if (used.tunes >= policy.max_tunes) return Action{};
            a.delta_temp = std::clamp(policy.tune_delta_temp, -10.0, 10.0);
            break;
        case ActionKind::Redose:
            if (used.redoses >= policy.max_redoses) return Action{};
            a.redose_fraction = policy.redose_fraction;
            a.delta_time = policy.extend_time;
            break;
        case ActionKind::Revert:
            if (used.reverts >= policy.max_reverts) return Action{};
            break;
        case ActionKind::Escalate: break;
    }
    return a;
}

double ErrorInjector::factor(int attempt, Rng& rng) const {
    if (!scripted.empty()) {
        auto it = scripted.find(attempt);
        return it == scripted.end() ? 1.0 : it->second;
    }
    if (!rng.bernoulli(epsilon)) return 1.0;
    return rng.uniform(low, high);
}

Checkpoint take_checkpoint(const cstm::MachineState& state, int validated_reactions) {
    return Checkpoint{state, validated_reactions};
}

cstm::MachineState restore_checkpoint(const cstm::MachineState& current, const Checkpoint& cp) {
    cstm::MachineState next = cp.state;
    Multiset dumped = current.line;
    for (std::size_t i = 1; i < current.tape.size(); ++i) {
        for (const auto& [sp, a] : current.tape[i].contents) add_amount(dumped, sp, a);
    }
    Multiset credited = cp.state.line;
    for (std::size_t i = 1; i < cp.state.tape.size(); ++i) {
        for (const auto& [sp, a] : cp.state.tape[i].contents) add_amount(credited, sp, a);
    }
    next.tape[0] = current.tape[0];
    for (const auto& [sp, a] : dumped) add_amount(next.tape[0].contents, sp, a);
    if (!next.tape[0].contents.empty()) next.tape[0].state = cstm::CellState::Filled;
    next.ledger = current.ledger;
    for (const auto& [sp, a] : credited) add_amount(next.ledger.in, sp, a);
    next.step_count = current.step_count;
    next.reactions = current.reactions;
    next.outcome = current.outcome;
    next.halt.reset();
    return next;
}

bool matches_checkpoint(const cstm::MachineState& s, const Checkpoint& cp) {
    const auto& c = cp.state;
    if (s.tape.size() != c.tape.size()) return false;
    for (std::size_t i = 1; i < s.tape.size(); ++i) {
        if (!(s.tape[i] == c.tape[i])) return false;
    }
    return s.controller == c.controller && s.cell_index == c.cell_index && s.head == c.head && s.line == c.line &&
           s.pending == c.pending && s.reacting == c.reacting && s.reagents == c.reagents &&
           s.solvents == c.solvents && s.capacity_ml == c.capacity_ml &&
           s.next_yield_factor == c.next_yield_factor && s.reagent_alphabet == c.reagent_alphabet &&
           s.process_alphabet == c.process_alphabet;
}

namespace {

cstm::TraceRecord dec_record(const cstm::MachineState& st, cstm::RecordKind kind, const cstm::TraceRecord& ref) {
    cstm::TraceRecord r;
    r.step = st.step_count;
    r.kind = kind;
    r.origin = cstm::Origin::Dec;
    r.op_index = ref.op_index;
    r.prim_index = ref.prim_index;
    r.op_kind = ref.op_kind;
    r.vessel = ref.vessel;
    r.label = ref.label;
    if (const auto* c = st.cell(ref.vessel)) r.before = r.after = cstm::snapshot(*c);
    return r;
}

SensorKind sensor_for(const HardwareGraph* graph, const std::string& vessel) {
    if (!graph) return SensorKind::Photon;
    const auto* n = graph->find(vessel);
    if (!n) return SensorKind::Photon;
    for (const auto& s : n->sensors) {
        if (s == "Conductivity") return SensorKind::Conductivity;
        if (s == "Chromatograph") return SensorKind::Chromatograph;
    }
    return SensorKind::Photon;
}

}  // namespace

DecRun run_with_dec(const ChemProgram& prog, const rules::RuleDatabase& db, const HardwareGraph* graph,
                    const DecOptions& opts) {
    const CorrectionPolicy& policy = opts.policy;
    policy.validate();
    DecRun out;
    const std::string id = "dec-" + to_hex(fnv1a(prog.name, fnv1a(std::to_string(opts.seed))));
    auto& trace = out.result.trace;
    trace.id = id;
    out.result.db = db;

    cstm::MachineState st;
    try {
        if (graph) {
            auto compiled = chempiler::chempile(prog, *graph, db);
            if (!compiled.plan) {
                const auto& f = compiled.report.findings.front();
                throw PreconditionError("program does not fit the graph: " + std::string(to_string(f.kind)) + " " +
                                        f.subject);
            }
            st = chempiler::plan_machine(*compiled.plan, db, opts.budget);
        } else {
            st = cstm::init_machine(prog, opts.budget, &db);
        }
    } catch (const cstm::MachineError& e) {
        trace.halt = cstm::HaltState{rules::HaltKind::Fail, e.what(), id};
        return out;
    }

    rules::RuleDatabase& d = out.result.db;
    Rng inject(derive_seed(opts.seed, "inject"));
    Rng sensor_rng(derive_seed(opts.seed, "sensor"));
    Rng correct(derive_seed(opts.seed, "correct"));
    DecStats& stats = out.stats;
    Budgets used;
    int attempt = 0;
    int validated = 0;
    Checkpoint cp = take_checkpoint(st, 0);
    auto fail = [&](std::string reason) {
        st.halt = cstm::HaltState{rules::HaltKind::Fail, std::move(reason), id};
        st.controller = "q_fail";
    };

    while (!st.halt) {
        std::optional<double> factor;
        double duration = 0.0;
        if (st.reacting && st.step_count < st.budget) {
            auto it = st.cell_index.find(st.reacting->prim.vessel);
            if (it != st.cell_index.end() && it->second == st.head) {
                factor = opts.injector.factor(++attempt, inject);
                duration = st.reacting->prim.duration;
                st.next_yield_factor = *factor;
            }
        }
        cstm::StepResult r = cstm::step(st, d);
        if (r.record) trace.records.push_back(std::move(*r.record));
        if (r.halt) break;
        if (!factor || trace.records.empty() || trace.records.back().kind != cstm::RecordKind::Transition) continue;

        ++stats.transformations;
        const cstm::TraceRecord tr = trace.records.back();
        const rules::TransitionRule rule = *d.find_rule(tr.rule_id);
        const double extent = parse_double(tr.info.at("extent"));
        const double expected = expected_yield(rule, duration, duration);
        const SensorModel sensor{sensor_for(graph, tr.vessel), policy.sensor_noise_sd, Observable::YieldFraction};
        double f = *factor;
        bool reverted = false;

        for (;;) {
            const double achieved = std::clamp(rule.yield * f, 0.0, 1.0);
            const double reading = sample_sensor(view_of(st, tr.vessel, achieved), sensor, sensor_rng);
            auto sensing = dec_record(st, cstm::RecordKind::Sensing, tr);
            sensing.info["sensor"] = std::string(to_string(sensor.kind));
            sensing.info["observable"] = std::string(to_string(sensor.observable));
            sensing.info["reading"] = format_double(reading);
            sensing.info["expected"] = format_double(expected);
            trace.records.push_back(std::move(sensing));

            if (!policy.enabled) {
                const double gap = relative_gap(achieved, expected);
                if (classify_gap(gap, policy) != Severity::None) {
                    auto dev = dec_record(st, cstm::RecordKind::Deviation, tr);
                    dev.info["gap"] = format_double(gap);
                    dev.info["severity"] = std::string(to_string(classify_gap(gap, policy)));
                    trace.records.push_back(std::move(dev));
                    ++stats.deviations;
                    fail("uncorrected deviation at " + tr.vessel);
                }
                break;
            }

            auto dev = detect_deviation(reading, expected, policy, st.step_count);
            if (!dev) break;
            ++stats.deviations;
            const Severity sev = classify_severity(*dev, policy);
            auto drec = dec_record(st, cstm::RecordKind::Deviation, tr);
            drec.info["gap"] = format_double(dev->relative_gap);
            drec.info["severity"] = std::string(to_string(sev));
            trace.records.push_back(std::move(drec));

            const Action a = corrective_action(sev, policy, used);
            auto arec = dec_record(st, cstm::RecordKind::Action, tr);
            arec.info["action"] = std::string(to_string(a.kind));
            if (a.kind == ActionKind::Escalate) {
                trace.records.push_back(std::move(arec));
                fail("correction budget exhausted at " + tr.vessel);
                break;
            }
            if (a.kind == ActionKind::Revert) {
                ++used.reverts;
                ++stats.reverts;
                arec.info["checkpoint"] = std::to_string(cp.validated_reactions);
                st = restore_checkpoint(st, cp);
                if (!matches_checkpoint(st, cp)) stats.restores_exact = false;
                arec.after = arec.before;
                if (const auto* c = st.cell(tr.vessel)) arec.after = cstm::snapshot(*c);
                trace.records.push_back(std::move(arec));
                reverted = true;
                break;
            }
            if (a.kind == ActionKind::Tune) {
                ++used.tunes;
                ++stats.tunes;
                auto& cell = st.tape[static_cast<std::size_t>(st.cell_index.at(tr.vessel))];
                if (!cell.contents.empty()) {
                    cell.temperature += a.delta_temp;
                    cell.energy_input += std::abs(a.delta_temp);
                }
                arec.info["delta_temp"] = format_double(a.delta_temp);
                arec.after = cstm::snapshot(cell);
                trace.records.push_back(std::move(arec));
            } else {
                ++used.redoses;
                ++stats.redoses;
                const std::string limiting = tr.info.count("limiting") ? tr.info.at("limiting") : "";
                arec.info["redose_fraction"] = format_double(a.redose_fraction);
                arec.info["extend_time"] = format_double(a.delta_time);
                arec.info["species"] = limiting;
                trace.records.push_back(std::move(arec));
                if (!limiting.empty() && rule.reagents.count(limiting)) {
                    const double amount = a.redose_fraction * rule.reagents.at(limiting) * extent * (1.0 - f);
                    if (amount > 0.0) {
                        Primitive am;
                        am.kind = PrimitiveKind::AM;
                        am.vessel = tr.vessel;
                        am.counterpart = Endpoint::reservoir(limiting);
                        am.amount = Quantity{amount, Unit::Mol};
                        cstm::TraceRecord prec = dec_record(st, cstm::RecordKind::Primitive, tr);
                        prec.primitive = am;
                        prec.moved = cstm::apply_primitive(st, am, &d);
                        prec.after = cstm::snapshot(*st.cell(tr.vessel));
                        trace.records.push_back(std::move(prec));
                    }
                }
            }
            const double df = correct.bernoulli(1.0 - opts.injector.epsilon) ? 1.0 - f
                                                                               : (1.0 - f) * correct.uniform(0.0, 0.5);
            if (df > 0.0) {
                auto rec = cstm::apply_rule(st, d, tr.vessel, rule.id, extent, df, cstm::Origin::Dec);
                rec.step = st.step_count;
                rec.op_index = tr.op_index;
                rec.prim_index = tr.prim_index;
                rec.op_kind = tr.op_kind;
                rec.label = tr.label;
                trace.records.push_back(std::move(rec));
                f += df;
            }
        }
        if (st.halt || reverted) continue;
        cp = take_checkpoint(st, ++validated);
        ++stats.checkpoints;
        auto crec = dec_record(st, cstm::RecordKind::Checkpoint, tr);
        crec.info["checkpoint"] = std::to_string(validated);
        trace.records.push_back(std::move(crec));
    }

    trace.halt = *st.halt;
    trace.halt.trace_ref = id;
    st.halt->trace_ref = id;
    trace.final_state = std::move(st);
    return out;
}

double binomial_upper_tail(int k, int n) {
    if (n <= 0 || k <= 0) return 1.0;
    if (k > n) return 0.0;
    double p = 0.0;
    for (int i = k; i <= n; ++i) {
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

PairedComparison compare_paired(const ChemProgram& prog, const rules::RuleDatabase& db, const HardwareGraph* graph,
                                const CorrectionPolicy& policy, double epsilon, int seeds, std::uint64_t master_seed) {
    PairedComparison c;
    c.seeds = seeds;
    DecOptions on;
    on.policy = policy;
    on.policy.enabled = true;
    on.injector.epsilon = epsilon;
    DecOptions off = on;
    off.policy.enabled = false;
    for (int i = 0; i < seeds; ++i) {
        on.seed = off.seed = derive_seed(master_seed, "pair", static_cast<std::uint64_t>(i));
        bool a = run_with_dec(prog, db, graph, on).result.trace.halt.kind == rules::HaltKind::Out;
        bool b = run_with_dec(prog, db, graph, off).result.trace.halt.kind == rules::HaltKind::Out;
        c.dec_out += a;
        c.plain_out += b;
        c.dec_only += a && !b;
        c.plain_only += b && !a;
    }
    c.p_value = binomial_upper_tail(c.dec_only, c.dec_only + c.plain_only);
    return c;
}

std::string comparison_to_table(const PairedComparison& c, double epsilon) {
    std::ostringstream os;
    os << "epsilon,seeds,dec_q_out,plain_q_out,dec_rate,plain_rate,dec_only,plain_only,p_value\n";
    os << format_double(epsilon) << ',' << c.seeds << ',' << c.dec_out << ',' << c.plain_out << ','
       << format_double(c.dec_rate()) << ',' << format_double(c.plain_rate()) << ',' << c.dec_only << ','
       << c.plain_only << ',' << format_double(c.p_value) << '\n';
    return os.str();
}

}  // namespace chemputer::dec
