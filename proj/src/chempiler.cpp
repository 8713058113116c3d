#include "chemputer/chempiler.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <json.hpp>
#include <set>

#include "chemputer/primitives.hpp"

namespace chemputer::chempiler {

std::string_view to_string(FindingKind k) {
    switch (k) {
        case FindingKind::MissingCapability: return "MissingCapability";
        case FindingKind::NoRoute: return "NoRoute";
        case FindingKind::CapacityExceeded: return "CapacityExceeded";
        case FindingKind::VesselClassExhausted: return "VesselClassExhausted";
        case FindingKind::ParamOutOfRange: return "ParamOutOfRange";
    }
    return "?";
}

bool FeasibilityReport::has(FindingKind k) const {
    return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.kind == k; });
}

namespace {

constexpr double kMinTemp = -200.0;
constexpr double kMaxTemp = 400.0;

bool is_builtin(const std::string& v) { return v == kWasteVessel || v == kProductVessel; }

std::string class_name(NodeKind k) {
    switch (vessel_class(k)) {
        case VesselClass::Reagent: return "V_R";
        case VesselClass::Process: return "V_P";
        case VesselClass::Output: return "V_O";
        case VesselClass::None: break;
    }
    return "none";
}

void param_findings(const ChemProgram& prog, FeasibilityReport& rep) {
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        const auto& op = prog.steps[i];
        const int idx = static_cast<int>(i);
        for (const auto& [key, value] : op.params) {
            const std::string subject = std::string(keyword(op.kind)) + "." + key;
            if (const auto* q = std::get_if<Quantity>(&value)) {
                if (q->unit == Unit::Celsius && (q->value < kMinTemp || q->value > kMaxTemp)) {
                    rep.findings.push_back({FindingKind::ParamOutOfRange, subject,
                                            format_double(q->value) + " C outside [-200, 400]", idx});
                } else if (q->unit == Unit::Second && !(q->value > 0.0)) {
                    rep.findings.push_back({FindingKind::ParamOutOfRange, subject, "duration must be > 0", idx});
                } else if ((q->unit == Unit::Mol || q->unit == Unit::Gram || q->unit == Unit::Millilitre) &&
                           !(q->value > 0.0)) {
                    rep.findings.push_back({FindingKind::ParamOutOfRange, subject, "amount must be > 0", idx});
                }
            } else if (const auto* d = std::get_if<double>(&value)) {
                if (key == "fraction" && !(*d > 0.0 && *d <= 1.0)) {
                    rep.findings.push_back({FindingKind::ParamOutOfRange, subject, "fraction outside (0, 1]", idx});
                }
            }
        }
    }
}

struct VesselInfo {
    std::set<UnitOpKind> caps;
    std::map<UnitOpKind, int> cap_first_op;
    std::optional<NodeKind> declared;
    int first = INT_MAX;
    int last = -1;
};

struct Layout {
    std::map<std::string, std::string> map;  // abstract vessel -> node
    std::map<std::string, VesselInfo> process;
    std::vector<std::string> sources;
};

Layout allocate(const ChemProgram& prog, const HardwareGraph& graph, FeasibilityReport& rep) {
    Layout lay;
    for (const auto& r : prog.reagents) {
        if (std::find(lay.sources.begin(), lay.sources.end(), r.source_vessel) == lay.sources.end()) {
            lay.sources.push_back(r.source_vessel);
        }
    }
    auto is_source = [&](const std::string& v) {
        return std::find(lay.sources.begin(), lay.sources.end(), v) != lay.sources.end();
    };
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        const auto& op = prog.steps[i];
        const int idx = static_cast<int>(i);
        for (const auto& [key, value] : op.params) {
            const auto* sym = std::get_if<Symbol>(&value);
            if (!sym || !is_vessel_param(key) || is_builtin(sym->text) || is_source(sym->text)) continue;
            auto& info = lay.process[sym->text];
            info.first = std::min(info.first, idx);
            info.last = std::max(info.last, idx);
        }
        if (!is_movement_op(op.kind)) {
            const std::string host = host_vessel(op);
            if (lay.process.count(host)) {
                auto& info = lay.process[host];
                if (info.caps.insert(op.kind).second) info.cap_first_op[op.kind] = idx;
            }
        }
    }
    for (const auto& h : prog.hardware_reqs) {
        auto it = lay.process.find(h.vessel);
        if (it != lay.process.end()) it->second.declared = node_kind_from_name(h.kind);
    }

    auto first_of_kind = [&](NodeKind k) -> std::optional<std::string> {
        for (const auto& [id, n] : graph.nodes) {
            if (n.kind == k) return id;
        }
        return std::nullopt;
    };
    if (auto w = first_of_kind(NodeKind::Waste)) {
        lay.map[kWasteVessel] = *w;
    } else {
        rep.findings.push_back({FindingKind::VesselClassExhausted, kWasteVessel, "graph has no waste node", -1});
    }
    if (auto p = first_of_kind(NodeKind::Product)) {
        lay.map[kProductVessel] = *p;
    } else {
        rep.findings.push_back({FindingKind::VesselClassExhausted, kProductVessel, "graph has no product node", -1});
    }

    std::set<std::string> used_flasks;
    for (const auto& v : lay.sources) {
        std::optional<std::string> pick;
        const auto* same = graph.find(v);
        if (same && same->kind == NodeKind::ReagentFlask && !used_flasks.count(v)) pick = v;
        for (const auto& [id, n] : graph.nodes) {
            if (pick) break;
            if (n.kind == NodeKind::ReagentFlask && !used_flasks.count(id)) pick = id;
        }
        if (!pick) {
            rep.findings.push_back({FindingKind::VesselClassExhausted, v, "no free reagent flask (V_R)", -1});
            continue;
        }
        used_flasks.insert(*pick);
        lay.map[v] = *pick;
    }

    std::vector<std::string> order;
    for (const auto& [v, _] : lay.process) order.push_back(v);
    std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
        const auto& ia = lay.process.at(a);
        const auto& ib = lay.process.at(b);
        return std::tie(ia.first, a) < std::tie(ib.first, b);
    });
    std::map<std::string, std::vector<std::pair<int, int>>> busy;
    for (const auto& v : order) {
        const VesselInfo& info = lay.process.at(v);
        auto kind_ok = [&](const HardwareNode& n) {
            if (!holds_material(n.kind)) return false;
            if (n.kind == NodeKind::ReagentFlask || n.kind == NodeKind::Waste || n.kind == NodeKind::Product) {
                return false;
            }
            return !info.declared || n.kind == *info.declared;
        };
        std::vector<const HardwareNode*> cands;
        for (const auto& [id, n] : graph.nodes) {
            if (!kind_ok(n)) continue;
            if (std::includes(n.capabilities.begin(), n.capabilities.end(), info.caps.begin(), info.caps.end())) {
                cands.push_back(&n);
            }
        }
        if (cands.empty()) {
            bool reported = false;
            for (auto cap : info.caps) {
                bool anywhere = std::any_of(graph.nodes.begin(), graph.nodes.end(), [&](const auto& kv) {
                    return kind_ok(kv.second) && kv.second.capabilities.count(cap);
                });
                if (!anywhere) {
                    rep.findings.push_back({FindingKind::MissingCapability, v,
                                            "no node can host " + std::string(to_string(cap)),
                                            info.cap_first_op.at(cap)});
                    reported = true;
                }
            }
            if (!reported) {
                std::string what = info.declared ? std::string(to_string(*info.declared)) : "holding node";
                rep.findings.push_back({FindingKind::MissingCapability, v,
                                        "no " + what + " hosts every operation required here", info.first});
            }
            continue;
        }
        std::stable_sort(cands.begin(), cands.end(), [](const HardwareNode* a, const HardwareNode* b) {
            return std::make_pair(a->capabilities.size(), a->id) < std::make_pair(b->capabilities.size(), b->id);
        });
        auto same = std::find_if(cands.begin(), cands.end(), [&](const HardwareNode* n) { return n->id == v; });
        if (same != cands.end()) std::rotate(cands.begin(), same, same + 1);
        std::optional<std::string> pick;
        for (const auto* n : cands) {
            const auto& iv = busy[n->id];
            bool clash = std::any_of(iv.begin(), iv.end(),
                                     [&](const auto& p) { return !(info.last < p.first || p.second < info.first); });
            if (!clash) {
                pick = n->id;
                break;
            }
        }
        if (!pick) {
            rep.findings.push_back({FindingKind::VesselClassExhausted, v,
                                    "every capable node is busy (" + class_name(cands.front()->kind) + ")",
                                    info.first});
            continue;
        }
        busy[*pick].push_back({info.first, info.last});
        lay.map[v] = *pick;
    }
    return lay;
}

struct Leg {
    int op = -1;
    int prim = -1;
    std::string src;  // abstract vessels
    std::string dst;
};

std::vector<Leg> legs(const ChemProgram& prog) {
    std::vector<Leg> out;
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        auto prims = expand_unit_op(prog.steps[i]);
        for (std::size_t j = 0; j < prims.size(); ++j) {
            const Primitive& p = prims[j];
            Leg l{static_cast<int>(i), static_cast<int>(j), {}, {}};
            const Endpoint& c = p.counterpart;
            if (p.kind == PrimitiveKind::AM && c.kind == Endpoint::Kind::Reagent) {
                if (const auto* r = prog.find_reagent(c.name)) l.src = r->source_vessel;
                l.dst = p.vessel;
            } else if (p.kind == PrimitiveKind::AM && c.kind == Endpoint::Kind::Vessel) {
                l.src = c.name;
                l.dst = p.vessel;
            } else if (p.kind == PrimitiveKind::SM && c.kind == Endpoint::Kind::Vessel) {
                l.src = p.vessel;
                l.dst = c.name;
            } else if (p.kind == PrimitiveKind::SM && c.kind == Endpoint::Kind::Line) {
                l.src = p.vessel;
                for (std::size_t k = j + 1; k < prims.size(); ++k) {
                    if (prims[k].kind == PrimitiveKind::AM && prims[k].counterpart.kind == Endpoint::Kind::Line) {
                        l.dst = prims[k].vessel;
                        break;
                    }
                }
            }
            if (!l.src.empty() && !l.dst.empty()) out.push_back(l);
        }
    }
    return out;
}

std::optional<double> pump_capacity(const HardwareGraph& g, const std::vector<std::string>& route) {
    std::optional<double> cap;
    for (const auto& id : route) {
        const auto* n = g.find(id);
        if (n && n->kind == NodeKind::Pump && n->capacity_ml > 0) {
            cap = cap ? std::min(*cap, n->capacity_ml) : n->capacity_ml;
        }
    }
    return cap;
}

std::string machine_name(const std::string& abstract_vessel, const Layout& lay) {
    if (is_builtin(abstract_vessel)) return abstract_vessel;
    auto it = lay.map.find(abstract_vessel);
    return it == lay.map.end() ? abstract_vessel : it->second;
}

ChemProgram lower_program(const ChemProgram& prog, const Layout& lay) {
    ChemProgram low = prog;
    for (auto& r : low.reagents) r.source_vessel = machine_name(r.source_vessel, lay);
    std::vector<HardwareReq> reqs;
    for (const auto& h : prog.hardware_reqs) {
        HardwareReq h2{machine_name(h.vessel, lay), h.kind};
        if (std::find(reqs.begin(), reqs.end(), h2) == reqs.end()) reqs.push_back(h2);
    }
    low.hardware_reqs = reqs;
    for (auto& op : low.steps) {
        for (auto& [key, value] : op.params) {
            if (auto* sym = std::get_if<Symbol>(&value); sym && is_vessel_param(key)) {
                sym->text = machine_name(sym->text, lay);
            }
        }
    }
    return low;
}

bool splittable(const Primitive& p) {
    const auto k = p.counterpart.kind;
    if (p.kind == PrimitiveKind::AM) return k == Endpoint::Kind::Reagent || k == Endpoint::Kind::Vessel;
    if (p.kind == PrimitiveKind::SM) return k == Endpoint::Kind::Vessel || k == Endpoint::Kind::Line;
    return false;
}

struct Episode {
    std::uint64_t start = 0;
    int op = -1;
    int prim = -1;
    std::string vessel;
    std::set<std::string> species;
};

}  // namespace

ValidationReport validate_program(const ChemProgram& prog, const HardwareGraph& graph) {
    ValidationReport rep;
    param_findings(prog, rep);
    Layout lay = allocate(prog, graph, rep);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& l : legs(prog)) {
        auto s = lay.map.find(l.src);
        auto d = lay.map.find(l.dst);
        if (s == lay.map.end() || d == lay.map.end() || s->second == d->second) continue;
        if (!seen.insert({s->second, d->second}).second) continue;
        if (!route(graph, s->second, d->second)) {
            rep.findings.push_back({FindingKind::NoRoute, s->second + "->" + d->second,
                                    "no valve/pump path from " + l.src + " to " + l.dst, l.op});
        }
    }
    return rep;
}

ChempileResult chempile(const ChemProgram& prog, const HardwareGraph& graph, const rules::RuleDatabase& db) {
    ChempileResult res;
    FeasibilityReport& rep = res.report;
    param_findings(prog, rep);
    Layout lay = allocate(prog, graph, rep);
    if (!rep.ok()) return res;

    CompiledPlan plan;
    plan.pathway_ref = prog.name;
    plan.graph_name = graph.name;
    plan.program = prog;
    plan.vessel_map = lay.map;

    // Dry run of the abstract machine: moved amounts, peak fill, episodes.
    cstm::MachineState st = cstm::init_machine(prog, cstm::kDefaultBudget * 100, &db);
    rules::RuleDatabase d = db;
    std::map<std::pair<int, int>, Multiset> moved;
    std::map<std::string, double> peak;
    std::map<std::string, std::vector<Episode>> episodes;
    std::map<std::string, bool> filled;
    auto observe = [&](const cstm::TraceRecord* rec) {
        for (const auto& c : st.tape) {
            if (is_builtin(c.name)) continue;
            peak[c.name] = std::max(peak[c.name], cstm::volume_ml(c.contents, &db));
            bool now = !c.contents.empty();
            if (now && !filled[c.name] && rec) {
                episodes[c.name].push_back({rec->step, rec->op_index, rec->prim_index, c.name, {}});
            }
            if (now && !episodes[c.name].empty()) {
                for (const auto& [sp, _] : c.contents) episodes[c.name].back().species.insert(sp);
            }
            filled[c.name] = now;
        }
    };
    observe(nullptr);
    for (;;) {
        auto r = cstm::step(st, d);
        if (r.record) {
            if (r.record->kind == cstm::RecordKind::Primitive) {
                moved[{r.record->op_index, r.record->prim_index}] = r.record->moved;
            }
            observe(&*r.record);
        }
        if (r.halt) break;
    }

    // Routes and pump strokes.
    std::map<std::pair<int, int>, int> strokes;
    for (const auto& l : legs(prog)) {
        const std::string& s = lay.map.at(l.src);
        const std::string& t = lay.map.at(l.dst);
        if (s == t) continue;
        auto path = route(graph, s, t);
        if (!path) {
            rep.findings.push_back({FindingKind::NoRoute, s + "->" + t,
                                    "no valve/pump path from " + l.src + " to " + l.dst, l.op});
            continue;
        }
        Transfer tr;
        tr.op_index = l.op;
        tr.prim_index = l.prim;
        tr.src = s;
        tr.dst = t;
        tr.route = *path;
        auto it = moved.find({l.op, l.prim});
        if (it != moved.end()) {
            tr.amount_mol = total_amount(it->second);
            tr.volume_ml = cstm::volume_ml(it->second, &db);
        }
        if (auto cap = pump_capacity(graph, tr.route); cap && tr.volume_ml > 0) {
            tr.strokes = std::max(1, static_cast<int>(std::ceil(tr.volume_ml / *cap * (1.0 - 1e-12))));
        }
        strokes[{l.op, l.prim}] = tr.strokes;
        plan.transfers.push_back(std::move(tr));
    }

    // Capacity per node.
    for (const auto& [v, node] : lay.map) {
        if (is_builtin(v)) continue;
        const auto* n = graph.find(node);
        double p = peak.count(v) ? peak.at(v) : 0.0;
        plan.peak_volume_ml[node] = std::max(plan.peak_volume_ml[node], p);
        if (n && n->capacity_ml > 0) {
            plan.capacity_ml[node] = n->capacity_ml;
            if (p > n->capacity_ml * (1.0 + 1e-9)) {
                rep.findings.push_back({FindingKind::CapacityExceeded, node,
                                        v + " peaks at " + format_double(p) + " mL of " +
                                            format_double(n->capacity_ml) + " mL",
                                        -1});
            }
        }
    }
    if (!rep.ok()) return res;

    // Cleaning whenever a node starts an episode with a different species set.
    std::map<std::string, std::vector<Episode>> per_node;
    for (const auto& [v, eps] : episodes) {
        if (!lay.process.count(v)) continue;
        for (const auto& e : eps) per_node[lay.map.at(v)].push_back(e);
    }
    for (auto& [node, eps] : per_node) {
        std::sort(eps.begin(), eps.end(), [](const Episode& a, const Episode& b) { return a.start < b.start; });
        for (std::size_t k = 1; k < eps.size(); ++k) {
            if (eps[k].species == eps[k - 1].species) continue;
            if (!route(graph, node, lay.map.at(kWasteVessel))) {
                rep.findings.push_back({FindingKind::NoRoute, node + "->" + lay.map.at(kWasteVessel),
                                        "cannot flush " + node + " to waste", eps[k].op});
                continue;
            }
            plan.cleaning.push_back({eps[k].op, eps[k].prim, node, eps[k].vessel, kCleanAmountMol});
        }
    }
    if (!rep.ok()) return res;
    std::sort(plan.cleaning.begin(), plan.cleaning.end(), [](const CleanInsertion& a, const CleanInsertion& b) {
        return std::tie(a.before_op, a.before_prim, a.node) < std::tie(b.before_op, b.before_prim, b.node);
    });

    // Allocations and vessel classes.
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        plan.allocations[static_cast<int>(i)] = lay.map.count(host_vessel(prog.steps[i]))
                                                     ? lay.map.at(host_vessel(prog.steps[i]))
                                                     : host_vessel(prog.steps[i]);
    }
    std::map<std::string, std::set<std::string>> used;
    for (const auto& [v, node] : lay.map) {
        if (const auto* n = graph.find(node)) used[class_name(n->kind)].insert(node);
    }
    for (const auto& [id, n] : graph.nodes) {
        std::string c = class_name(n.kind);
        if (c == "none") continue;
        plan.vessel_classes[c].available += 1;
    }
    for (auto& [c, usage] : plan.vessel_classes) usage.used = static_cast<int>(used[c].size());

    // Lowered queue.
    plan.lowered = lower_program(prog, lay);
    for (std::size_t i = 0; i < prog.steps.size(); ++i) {
        const int oi = static_cast<int>(i);
        auto abstract_prims = expand_unit_op(prog.steps[i]);
        auto low_prims = expand_unit_op(plan.lowered.steps[i]);
        for (std::size_t j = 0; j < low_prims.size(); ++j) {
            const int pj = static_cast<int>(j);
            for (const auto& c : plan.cleaning) {
                if (c.before_op != oi || c.before_prim != pj) continue;
                cstm::PendingPrimitive am, sm;
                am.prim.kind = PrimitiveKind::AM;
                am.prim.vessel = c.node;
                am.prim.counterpart = Endpoint::reservoir(cstm::kCleanSolvent);
                am.prim.amount = Quantity{c.amount_mol, Unit::Mol};
                sm.prim.kind = PrimitiveKind::SM;
                sm.prim.vessel = c.node;
                sm.prim.counterpart = Endpoint::vessel(kWasteVessel);
                for (auto* p : {&am, &sm}) {
                    p->origin = cstm::Origin::Clean;
                    p->op_index = oi;
                    p->op_kind = UnitOpKind::Clean;
                    p->label = c.vessel;
                }
                am.prim_index = 0;
                sm.prim_index = 1;
                plan.queue.push_back(am);
                plan.queue.push_back(sm);
            }
            cstm::PendingPrimitive base;
            base.prim = low_prims[j];
            base.origin = cstm::Origin::Program;
            base.op_index = oi;
            base.prim_index = pj;
            base.op_kind = prog.steps[i].kind;
            base.label = abstract_prims[j].vessel;
            int n = strokes.count({oi, pj}) ? strokes.at({oi, pj}) : 1;
            if (n <= 1 || !splittable(base.prim)) {
                plan.queue.push_back(base);
                continue;
            }
            const double F = base.prim.fraction.value_or(1.0);
            for (int k = 0; k < n; ++k) {
                cstm::PendingPrimitive s = base;
                if (base.prim.amount) {
                    s.prim.amount->value = base.prim.amount->value / n;
                } else {
                    double share = F / n;
                    s.prim.fraction = k == n - 1 && F == 1.0 ? 1.0 : share / (1.0 - k * share);
                }
                if (k < n - 1) s.origin = cstm::Origin::Stroke;
                s.prim_index = pj;
                plan.queue.push_back(std::move(s));
            }
        }
    }
    for (const auto& [v, node] : lay.map) {
        const auto* n = graph.find(node);
        if (n && n->capacity_ml > 0) plan.capacity_ml[machine_name(v, lay)] = n->capacity_ml;
    }
    for (auto it = plan.capacity_ml.begin(); it != plan.capacity_ml.end();) {
        bool is_cell = it->first == kWasteVessel || it->first == kProductVessel;
        for (const auto& [v, node] : lay.map) is_cell = is_cell || machine_name(v, lay) == it->first;
        it = is_cell ? std::next(it) : plan.capacity_ml.erase(it);
    }
    res.plan = std::move(plan);
    return res;
}

ChempileResult chempile(const rules::Pathway& pathway, const rules::RuleDatabase& db, const HardwareGraph& graph) {
    ChempileResult r = chempile(pathway_program(pathway, db), graph, db);
    if (r.plan) r.plan->pathway_ref = "pathway:" + pathway.target;
    return r;
}

cstm::MachineState plan_machine(const CompiledPlan& plan, const rules::RuleDatabase& db, std::uint64_t budget) {
    cstm::MachineState st = cstm::init_machine(plan.lowered, budget, &db);
    st.pending = plan.queue;
    st.capacity_ml = plan.capacity_ml;
    return st;
}

cstm::RunResult execute_plan(const CompiledPlan& plan, const rules::RuleDatabase& db, std::uint64_t budget) {
    cstm::RunResult r = cstm::run_machine(plan_machine(plan, db, budget), db);
    std::string id = "plan-" + to_hex(fnv1a(plan.pathway_ref, fnv1a(plan.graph_name)));
    r.trace.id = id;
    r.trace.halt.trace_ref = id;
    r.trace.final_state.halt->trace_ref = id;
    return r;
}

// ---------------------------------------------------------------------------
// Pathway encoding

namespace {

std::string ident_of(const std::string& species) {
    std::string s;
    for (char c : species) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return "r_" + s;
}

rules::ProcessPoint condition_point(const rules::TransitionRule& rule, const rules::RuleDatabase& db) {
    Multiset contents;
    for (const auto& [sp, _] : rule.reagents) contents[sp] = 1.0;
    for (const auto& k : rule.catalysts) contents[k] = 1.0;
    const auto& w = rule.window;
    auto usable = [&](const rules::ProcessPoint& p) {
        if (!(p.duration > 0.0) || p.temp < kMinTemp || p.temp > kMaxTemp) return false;
        auto m = rules::match_rule(db, contents, p);
        return m && m->rule_id == rule.id;
    };
    rules::ProcessPoint mid = w.midpoint();
    if (usable(mid)) return mid;
    for (int i = 0; i <= 10; ++i) {
        for (int j = 0; j <= 10; ++j) {
            rules::ProcessPoint p{w.temp_min + (w.temp_max - w.temp_min) * i / 10.0,
                                  w.time_min + (w.time_max - w.time_min) * j / 10.0};
            if (usable(p)) return p;
        }
    }
    return mid;
}

UnitOperation make_op(UnitOpKind kind, std::map<std::string, ParamValue> params, int reaction_step) {
    UnitOperation op;
    op.kind = kind;
    op.params = std::move(params);
    op.metadata["reaction_step"] = std::to_string(reaction_step);
    return op;
}

}  // namespace

ChemProgram pathway_program(const rules::Pathway& pathway, const rules::RuleDatabase& db) {
    if (pathway.steps.empty()) throw PreconditionError("an empty pathway has no program encoding");
    constexpr double kBase = 0.1;  // mol per unit coefficient
    const std::string reactor = "RX1";
    const std::size_t n = pathway.steps.size();
    std::vector<const rules::TransitionRule*> rs;
    for (const auto& s : pathway.steps) {
        const auto* r = db.find_rule(s.rule_id);
        if (!r) throw PreconditionError("pathway uses unknown rule '" + s.rule_id + "'");
        rs.push_back(r);
    }

    // Where each input comes from: earlier producer or stock.
    std::map<std::string, std::size_t> producer;
    std::set<std::string> stock;
    std::vector<std::vector<std::pair<std::string, bool>>> inputs(n);  // (species, catalyst)
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [sp, _] : rs[i]->reagents) inputs[i].push_back({sp, false});
        for (const auto& k : rs[i]->catalysts) inputs[i].push_back({k, true});
        for (const auto& [sp, catalyst] : inputs[i]) {
            if (!producer.count(sp)) stock.insert(sp);
        }
        for (const auto& [sp, _] : rs[i]->products) {
            if (!producer.count(sp) && !stock.count(sp)) producer[sp] = i;
        }
    }
    std::map<std::string, int> consumers;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [sp, _] : inputs[i]) {
            if (!stock.count(sp)) consumers[sp] += 1;
        }
    }

    ChemProgram prog;
    prog.name = "pathway_" + pathway.target;
    for (char& c : prog.name) {
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    }
    prog.metadata["target"] = pathway.target;

    std::map<std::string, double> stock_amount;
    std::map<std::string, bool> only_catalyst;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [sp, catalyst] : inputs[i]) {
            if (!stock.count(sp)) continue;
            stock_amount[sp] += catalyst ? kBase / 10 : rs[i]->reagents.at(sp) * kBase;
            if (!only_catalyst.count(sp)) only_catalyst[sp] = true;
            if (!catalyst) only_catalyst[sp] = false;
        }
    }
    int flask = 0;
    std::map<std::string, std::string> reagent_id;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [sp, _] : inputs[i]) {
            if (!stock.count(sp) || reagent_id.count(sp)) continue;
            reagent_id[sp] = ident_of(sp);
            ReagentDecl d;
            d.id = reagent_id[sp];
            d.species = sp;
            d.amount = Quantity{stock_amount[sp], Unit::Mol};
            d.source_vessel = "R" + std::to_string(++flask);
            d.role = only_catalyst[sp] ? ReagentRole::Catalyst : ReagentRole::Reagent;
            prog.reagents.push_back(d);
        }
    }
    prog.hardware_reqs.push_back({reactor, "Reactor"});

    std::map<std::string, std::string> storage_of;  // species -> storage vessel
    std::map<std::string, int> remaining = consumers;
    int storages = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int rstep = static_cast<int>(i) + 1;
        const auto& rule = *rs[i];
        const auto point = condition_point(rule, db);
        const auto& ins = inputs[i];
        for (std::size_t k = 0; k < ins.size(); ++k) {
            const auto& [sp, catalyst] = ins[k];
            const bool last = k + 1 == ins.size();
            std::map<std::string, ParamValue> params{{"vessel", Symbol{reactor}}};
            if (stock.count(sp)) {
                params["reagent"] = Symbol{reagent_id.at(sp)};
                double amt = catalyst ? kBase / 10 : rule.reagents.at(sp) * kBase;
                params["amount"] = Quantity{amt, Unit::Mol};
            } else {
                double frac = 1.0 / remaining.at(sp);
                remaining[sp] -= 1;
                params["from"] = Symbol{storage_of.at(sp)};
                params["species"] = Symbol{sp};
                if (frac < 1.0) params["fraction"] = frac;
            }
            if (last) {
                params["temp"] = Quantity{point.temp, Unit::Celsius};
                params["time"] = Quantity{point.duration, Unit::Second};
                auto kind = point.temp >= kAmbientTemp ? UnitOpKind::ReactHot : UnitOpKind::ReactCold;
                prog.steps.push_back(make_op(kind, std::move(params), rstep));
            } else if (stock.count(sp)) {
                prog.steps.push_back(make_op(UnitOpKind::Add, std::move(params), rstep));
            } else {
                std::map<std::string, ParamValue> tp{{"from", params.at("from")},
                                                     {"to", Symbol{reactor}},
                                                     {"species", Symbol{sp}}};
                if (params.count("fraction")) tp["fraction"] = params.at("fraction");
                prog.steps.push_back(make_op(UnitOpKind::Transfer, std::move(tp), rstep));
            }
        }
        for (const auto& [sp, _] : rule.products) {
            if (sp == pathway.target) {
                prog.steps.push_back(make_op(UnitOpKind::Transfer,
                                             {{"from", Symbol{reactor}},
                                              {"to", Symbol{kProductVessel}},
                                              {"species", Symbol{sp}}},
                                             rstep));
            } else if (producer.count(sp) && producer.at(sp) == i && consumers.count(sp)) {
                std::string s = "S" + std::to_string(++storages);
                storage_of[sp] = s;
                prog.hardware_reqs.push_back({s, "Storage"});
                prog.steps.push_back(make_op(UnitOpKind::Transfer,
                                             {{"from", Symbol{reactor}}, {"to", Symbol{s}}, {"species", Symbol{sp}}},
                                             rstep));
            }
        }
        prog.steps.push_back(
            make_op(UnitOpKind::Transfer, {{"from", Symbol{reactor}}, {"to", Symbol{kWasteVessel}}}, rstep));
    }
    return prog;
}

// ---------------------------------------------------------------------------
// Equivalence and validity

namespace {

struct Observation {
    int op = -1;
    int prim = -1;
    cstm::RecordKind kind = cstm::RecordKind::Primitive;
    std::string label;
    Multiset contents;
};

std::vector<Observation> observations(const cstm::ExecutionTrace& t) {
    std::vector<Observation> out;
    for (const auto& r : t.records) {
        if (r.origin != cstm::Origin::Program) continue;
        if (r.kind != cstm::RecordKind::Primitive && r.kind != cstm::RecordKind::Transition) continue;
        if (r.op_kind && *r.op_kind == UnitOpKind::Transfer) continue;
        Observation o{r.op_index, r.prim_index, r.kind, r.label, r.after.contents};
        o.contents.erase(cstm::kCleanSolvent);
        out.push_back(std::move(o));
    }
    return out;
}

bool close(const Multiset& a, const Multiset& b) {
    std::set<std::string> keys;
    for (const auto& [k, _] : a) keys.insert(k);
    for (const auto& [k, _] : b) keys.insert(k);
    for (const auto& k : keys) {
        double x = amount_of(a, k), y = amount_of(b, k);
        if (std::abs(x - y) > kLedgerTolerance * std::max({1.0, std::abs(x), std::abs(y)})) return false;
    }
    return true;
}

}  // namespace

Equivalence lowering_equivalent(const cstm::ExecutionTrace& abstract_run, const cstm::ExecutionTrace& compiled_run) {
    Equivalence eq;
    auto a = observations(abstract_run);
    auto c = observations(compiled_run);
    if (abstract_run.halt.kind != compiled_run.halt.kind) {
        eq.detail = "halt differs: " + std::string(rules::to_string(abstract_run.halt.kind)) + " vs " +
                    std::string(rules::to_string(compiled_run.halt.kind));
        return eq;
    }
    if (a.size() != c.size()) {
        eq.detail = "record count differs: " + std::to_string(a.size()) + " vs " + std::to_string(c.size());
        return eq;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = c[i];
        if (x.op != y.op || x.prim != y.prim || x.kind != y.kind || x.label != y.label ||
            !close(x.contents, y.contents)) {
            eq.detail = "divergence at op " + std::to_string(x.op) + " primitive " + std::to_string(x.prim) +
                        " in " + x.label;
            return eq;
        }
    }
    eq.equivalent = true;
    eq.compared = a.size();
    return eq;
}

bool route_valid(const HardwareGraph& graph, const std::vector<std::string>& r) {
    if (r.size() < 2) return false;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        auto succ = graph.successors(r[i]);
        if (std::find(succ.begin(), succ.end(), r[i + 1]) == succ.end()) return false;
        if (i > 0) {
            const auto* n = graph.find(r[i]);
            if (!n || !is_flow_through(n->kind)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// JSON

namespace {
using ojson = nlohmann::ordered_json;

ojson finding_json(const Finding& f) {
    ojson j;
    j["kind"] = std::string(to_string(f.kind));
    j["subject"] = f.subject;
    j["detail"] = f.detail;
    if (f.op_index >= 0) j["op"] = f.op_index;
    return j;
}
}  // namespace

std::string report_to_json(const FeasibilityReport& report) {
    ojson j;
    j["ok"] = report.ok();
    j["findings"] = ojson::array();
    for (const auto& f : report.findings) j["findings"].push_back(finding_json(f));
    return j.dump(2) + "\n";
}

std::string plan_to_json(const CompiledPlan& plan) {
    ojson j;
    j["pathway_ref"] = plan.pathway_ref;
    j["graph"] = plan.graph_name;
    j["vessel_map"] = ojson::object();
    for (const auto& [v, n] : plan.vessel_map) j["vessel_map"][v] = n;
    j["allocations"] = ojson::array();
    for (const auto& [op, n] : plan.allocations) {
        j["allocations"].push_back({{"op", op}, {"kind", std::string(to_string(plan.program.steps[op].kind))},
                                    {"node", n}});
    }
    j["transfers"] = ojson::array();
    for (const auto& t : plan.transfers) {
        j["transfers"].push_back({{"op", t.op_index},
                                  {"prim", t.prim_index},
                                  {"src", t.src},
                                  {"dst", t.dst},
                                  {"route", t.route},
                                  {"amount_mol", format_double(t.amount_mol)},
                                  {"volume_ml", format_double(t.volume_ml)},
                                  {"strokes", t.strokes}});
    }
    j["cleaning"] = ojson::array();
    for (const auto& c : plan.cleaning) {
        j["cleaning"].push_back({{"before_op", c.before_op},
                                 {"before_prim", c.before_prim},
                                 {"node", c.node},
                                 {"vessel", c.vessel},
                                 {"solvent", cstm::kCleanSolvent},
                                 {"amount_mol", format_double(c.amount_mol)}});
    }
    j["vessel_classes"] = ojson::object();
    for (const auto& [c, u] : plan.vessel_classes) {
        j["vessel_classes"][c] = {{"used", u.used}, {"available", u.available}};
    }
    j["peak_volume_ml"] = ojson::object();
    for (const auto& [n, v] : plan.peak_volume_ml) j["peak_volume_ml"][n] = format_double(v);
    j["queue_length"] = plan.queue.size();
    return j.dump(2) + "\n";
}

}  // namespace chemputer::chempiler
