#include "chemputer/rules.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <json.hpp>

#include "chemputer/assembly.hpp"
#include "chemputer/json_util.hpp"
#include "chemputer/rng.hpp"

namespace chemputer::rules {

std::string_view to_string(RuleStatus s) {
    switch (s) {
        case RuleStatus::Characterised: return "characterised";
        case RuleStatus::Predicted: return "predicted";
        case RuleStatus::Novel: return "novel";
    }
    return "?";
}

std::optional<RuleStatus> rule_status_from_string(std::string_view s) {
    if (s == "characterised") return RuleStatus::Characterised;
    if (s == "predicted") return RuleStatus::Predicted;
    if (s == "novel") return RuleStatus::Novel;
    return std::nullopt;
}

std::string_view to_string(HaltKind k) {
    switch (k) {
        case HaltKind::Out: return "q_out";
        case HaltKind::UOut: return "q_uout";
        case HaltKind::NOut: return "q_nout";
        case HaltKind::Fail: return "q_fail";
    }
    return "?";
}

std::optional<HaltKind> halt_kind_from_string(std::string_view s) {
    for (auto k : {HaltKind::Out, HaltKind::UOut, HaltKind::NOut, HaltKind::Fail}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::vector<std::string> check_species(const Species& s) {
    std::vector<std::string> problems;
    if (s.id.empty()) problems.emplace_back("species id is empty");
    if (!(s.molar_mass > 0.0)) problems.push_back("species '" + s.id + "' molar_mass must be > 0");
    for (const auto& [el, n] : s.elements) {
        if (n < 0) problems.push_back("species '" + s.id + "' has a negative count of " + el);
    }
    if (s.assembly_index && *s.assembly_index < 0) problems.push_back("species '" + s.id + "' assembly_index must be >= 0");
    if (s.bonds && *s.bonds < 0) problems.push_back("species '" + s.id + "' bonds must be >= 0");
    if (s.assembly_index && s.bonds && *s.bonds >= 2) {
        auto b = assembly::assembly_bounds(*s.bonds);
        if (*s.assembly_index < b.min || *s.assembly_index > b.max) {
            problems.push_back("species '" + s.id + "' assembly_index " + std::to_string(*s.assembly_index) +
                               " outside bounds [" + std::to_string(b.min) + ", " + std::to_string(b.max) + "] for " +
                               std::to_string(*s.bonds) + " bonds");
        }
    }
    return problems;
}

namespace {

constexpr double kElementTolerance = 1e-9;

// Validates a rule against the species table; fills in its byproduct and
// returns the byproduct species (if any).
std::optional<Species> prepare_rule(TransitionRule& rule, const std::map<std::string, Species>& species) {
    auto need = [&](const std::string& id, const char* role) -> const Species& {
        auto it = species.find(id);
        if (it == species.end()) throw RulesError("rule '" + rule.id + "' references unknown " + role + " '" + id + "'");
        return it->second;
    };
    if (rule.id.empty()) throw RulesError("rule id is empty");
    if (rule.reagents.empty()) throw RulesError("rule '" + rule.id + "' has no reagents");
    if (rule.products.empty()) throw RulesError("rule '" + rule.id + "' has no products");
    if (!(rule.yield > 0.0 && rule.yield <= 1.0)) throw RulesError("rule '" + rule.id + "' yield must lie in (0, 1]");
    if (!(rule.epsilon >= 0.0 && rule.epsilon < 1.0)) throw RulesError("rule '" + rule.id + "' epsilon must lie in [0, 1)");
    if (rule.occurrences < 0) throw RulesError("rule '" + rule.id + "' occurrences must be >= 0");
    if (rule.window.temp_min > rule.window.temp_max || rule.window.time_min > rule.window.time_max) {
        throw RulesError("rule '" + rule.id + "' has an empty process window");
    }
    std::map<std::string, double> balance;  // element -> inputs - outputs
    double mass_in = 0.0, mass_out = 0.0;
    for (const auto& [id, coef] : rule.reagents) {
        if (!(coef > 0.0)) throw RulesError("rule '" + rule.id + "' reagent coefficients must be > 0");
        const Species& s = need(id, "reagent");
        for (const auto& [el, n] : s.elements) balance[el] += coef * n;
        mass_in += coef * s.molar_mass;
    }
    for (const auto& [id, coef] : rule.products) {
        if (!(coef > 0.0)) throw RulesError("rule '" + rule.id + "' product coefficients must be > 0");
        const Species& s = need(id, "product");
        for (const auto& [el, n] : s.elements) balance[el] -= coef * n;
        mass_out += coef * s.molar_mass;
    }
    for (const auto& c : rule.catalysts) {
        need(c, "catalyst");
        if (rule.reagents.count(c) || rule.products.count(c)) {
            throw RulesError("rule '" + rule.id + "' lists catalyst '" + c + "' as reagent or product");
        }
    }
    std::map<std::string, int> leftover;
    for (const auto& [el, diff] : balance) {
        if (diff < -kElementTolerance) {
            throw ConservationViolation(rule.id, el,
                                        "rule '" + rule.id + "' violates conservation: produces more " + el +
                                            " than it consumes");
        }
        if (diff > kElementTolerance) {
            double rounded = std::round(diff);
            if (std::abs(diff - rounded) > kElementTolerance) {
                throw ConservationViolation(rule.id, el,
                                            "rule '" + rule.id + "' leaves a fractional amount of " + el);
            }
            leftover[el] = static_cast<int>(rounded);
        }
    }
    rule.byproduct.clear();
    if (leftover.empty()) return std::nullopt;
    Species by;
    by.id = rule.id + "~byproduct";
    by.name = "byproduct of " + rule.id;
    by.molar_mass = std::max(mass_in - mass_out, 1e-12);
    by.elements = std::move(leftover);
    by.stable = false;
    rule.byproduct = by.id;
    return by;
}

}  // namespace

RuleDatabase RuleDatabase::create(std::vector<Species> species, std::vector<TransitionRule> rules,
                                  std::vector<PromotionEvent> provenance) {
    RuleDatabase db;
    for (auto& s : species) {
        if (s.id.find('~') != std::string::npos) continue;  // derived byproducts are rebuilt below
        auto problems = check_species(s);
        if (!problems.empty()) throw RulesError(problems.front());
        std::string id = s.id;
        if (!db.species_.emplace(id, std::move(s)).second) throw RulesError("duplicate species '" + id + "'");
    }
    std::map<std::string, Species> base = db.species_;
    for (auto& r : rules) {
        if (auto by = prepare_rule(r, base)) db.species_[by->id] = *by;
        std::string id = r.id;
        if (!db.rules_.emplace(id, std::move(r)).second) throw RulesError("duplicate rule '" + id + "'");
    }
    std::uint64_t last = 0;
    for (const auto& e : provenance) {
        if (e.seq <= last) throw RulesError("provenance events must be strictly increasing in sequence");
        last = e.seq;
    }
    db.provenance_ = std::move(provenance);
    return db;
}

const Species* RuleDatabase::find_species(const std::string& id) const {
    auto it = species_.find(id);
    return it == species_.end() ? nullptr : &it->second;
}

const TransitionRule* RuleDatabase::find_rule(const std::string& id) const {
    auto it = rules_.find(id);
    return it == rules_.end() ? nullptr : &it->second;
}

double RuleDatabase::molar_mass_or(const std::string& id, double fallback) const {
    const auto* s = find_species(id);
    return s ? s->molar_mass : fallback;
}

RuleDatabase RuleDatabase::with_rule(TransitionRule rule, const RuleDatabase* species_source) const {
    if (rules_.count(rule.id)) throw RulesError("duplicate rule '" + rule.id + "'");
    RuleDatabase copy = *this;
    if (species_source) {
        auto import = [&](const std::string& id) {
            if (copy.species_.count(id)) return;
            if (const auto* s = species_source->find_species(id)) copy.species_.emplace(id, *s);
        };
        for (const auto& [id, _] : rule.reagents) import(id);
        for (const auto& [id, _] : rule.products) import(id);
        for (const auto& id : rule.catalysts) import(id);
    }
    std::map<std::string, Species> base;
    for (const auto& [id, s] : copy.species_) {
        if (id.find('~') == std::string::npos) base.emplace(id, s);
    }
    if (auto by = prepare_rule(rule, base)) copy.species_[by->id] = *by;
    copy.rules_.emplace(rule.id, std::move(rule));
    return copy;
}

RuleDatabase RuleDatabase::with_updated_rule(const TransitionRule& rule, std::optional<PromotionEvent> event) const {
    RuleDatabase copy = *this;
    auto it = copy.rules_.find(rule.id);
    if (it == copy.rules_.end()) throw RulesError("unknown rule '" + rule.id + "'");
    it->second = rule;
    if (event) copy.provenance_.push_back(*event);
    return copy;
}

// ---------------------------------------------------------------------------
// File format

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::map<std::string, double> coef_map(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_object()) throw RulesError(std::string("field '") + key + "' must be an object");
    std::map<std::string, double> out;
    for (const auto& [k, c] : v.items()) {
        if (!c.is_number()) throw RulesError(std::string("coefficients in '") + key + "' must be numbers");
        out[k] = c.get<double>();
    }
    return out;
}

TransitionRule rule_from_json(const json& jr) {
    jsonutil::require_object(jr, "rule",
                             {"id", "reagents", "catalysts", "window", "products", "yield", "epsilon", "status",
                              "occurrences", "priority"},
                             {"id", "reagents", "products", "window"});
    TransitionRule r;
    r.id = jsonutil::get_string(jr, "id");
    r.reagents = coef_map(jr, "reagents");
    r.products = coef_map(jr, "products");
    if (jr.contains("catalysts")) {
        for (const auto& c : jsonutil::require_array(jr, "catalysts")) {
            if (!c.is_string()) throw RulesError("catalyst ids must be strings");
            r.catalysts.insert(c.get<std::string>());
        }
    }
    const auto& w = jr.at("window");
    jsonutil::require_object(w, "window", {"temp_min", "temp_max", "time_min", "time_max"},
                             {"temp_min", "temp_max", "time_min", "time_max"});
    r.window = {jsonutil::get_number(w, "temp_min"), jsonutil::get_number(w, "temp_max"),
                jsonutil::get_number(w, "time_min"), jsonutil::get_number(w, "time_max")};
    if (jr.contains("yield")) r.yield = jsonutil::get_number(jr, "yield");
    if (jr.contains("epsilon")) r.epsilon = jsonutil::get_number(jr, "epsilon");
    if (jr.contains("status")) {
        auto s = rule_status_from_string(jsonutil::get_string(jr, "status"));
        if (!s) throw RulesError("rule '" + r.id + "' has an unknown status");
        r.status = *s;
    }
    if (jr.contains("occurrences")) r.occurrences = static_cast<int>(jsonutil::get_number(jr, "occurrences"));
    if (jr.contains("priority")) r.priority = static_cast<int>(jsonutil::get_number(jr, "priority"));
    return r;
}

}  // namespace

RuleDatabase load_rules(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw RulesError(std::string("rules file is not valid JSON: ") + e.what());
    }
    try {
        jsonutil::require_object(doc, "rules file", {"species", "rules", "provenance"}, {"species", "rules"});
        std::vector<Species> species;
        for (const auto& js : jsonutil::require_array(doc, "species")) {
            jsonutil::require_object(js, "species",
                                     {"id", "name", "molar_mass", "elements", "stable", "assembly_index", "bonds"},
                                     {"id", "molar_mass", "elements"});
            Species s;
            s.id = jsonutil::get_string(js, "id");
            s.name = js.contains("name") ? jsonutil::get_string(js, "name") : s.id;
            s.molar_mass = jsonutil::get_number(js, "molar_mass");
            const auto& el = js.at("elements");
            if (!el.is_object()) throw RulesError("species '" + s.id + "' elements must be an object");
            for (const auto& [k, n] : el.items()) {
                if (!n.is_number_integer()) throw RulesError("species '" + s.id + "' element counts must be integers");
                s.elements[k] = n.get<int>();
            }
            if (js.contains("stable")) s.stable = jsonutil::get_bool(js, "stable");
            if (js.contains("assembly_index")) s.assembly_index = static_cast<int>(jsonutil::get_number(js, "assembly_index"));
            if (js.contains("bonds")) s.bonds = static_cast<std::int64_t>(jsonutil::get_number(js, "bonds"));
            species.push_back(std::move(s));
        }
        std::vector<TransitionRule> rules;
        for (const auto& jr : jsonutil::require_array(doc, "rules")) rules.push_back(rule_from_json(jr));
        std::vector<PromotionEvent> events;
        if (doc.contains("provenance")) {
            for (const auto& je : jsonutil::require_array(doc, "provenance")) {
                jsonutil::require_object(je, "provenance event", {"seq", "rule", "occurrences", "status_before", "status_after"},
                                         {"seq", "rule", "occurrences", "status_before", "status_after"});
                PromotionEvent e;
                e.seq = static_cast<std::uint64_t>(jsonutil::get_number(je, "seq"));
                e.rule_id = jsonutil::get_string(je, "rule");
                e.occurrences = static_cast<int>(jsonutil::get_number(je, "occurrences"));
                auto before = rule_status_from_string(jsonutil::get_string(je, "status_before"));
                auto after = rule_status_from_string(jsonutil::get_string(je, "status_after"));
                if (!before || !after) throw RulesError("provenance event has an unknown status");
                e.status_before = *before;
                e.status_after = *after;
                events.push_back(std::move(e));
            }
        }
        return RuleDatabase::create(std::move(species), std::move(rules), std::move(events));
    } catch (const jsonutil::SchemaError& e) {
        throw RulesError(e.what());
    } catch (const json::exception& e) {
        throw RulesError(std::string("rules file schema error: ") + e.what());
    }
}

std::string save_rules(const RuleDatabase& db) {
    ojson doc;
    doc["species"] = ojson::array();
    for (const auto& [id, s] : db.species()) {
        if (id.find('~') != std::string::npos) continue;
        ojson js;
        js["id"] = s.id;
        js["name"] = s.name;
        js["molar_mass"] = s.molar_mass;
        js["elements"] = ojson::object();
        for (const auto& [el, n] : s.elements) js["elements"][el] = n;
        js["stable"] = s.stable;
        if (s.assembly_index) js["assembly_index"] = *s.assembly_index;
        if (s.bonds) js["bonds"] = *s.bonds;
        doc["species"].push_back(js);
    }
    doc["rules"] = ojson::array();
    for (const auto& [id, r] : db.rules()) {
        ojson jr;
        jr["id"] = r.id;
        jr["reagents"] = ojson::object();
        for (const auto& [k, c] : r.reagents) jr["reagents"][k] = c;
        jr["catalysts"] = ojson::array();
        for (const auto& c : r.catalysts) jr["catalysts"].push_back(c);
        jr["window"] = {{"temp_min", r.window.temp_min},
                        {"temp_max", r.window.temp_max},
                        {"time_min", r.window.time_min},
                        {"time_max", r.window.time_max}};
        jr["products"] = ojson::object();
        for (const auto& [k, c] : r.products) jr["products"][k] = c;
        jr["yield"] = r.yield;
        jr["epsilon"] = r.epsilon;
        jr["status"] = std::string(to_string(r.status));
        jr["occurrences"] = r.occurrences;
        jr["priority"] = r.priority;
        doc["rules"].push_back(jr);
    }
    if (!db.provenance().empty()) {
        doc["provenance"] = ojson::array();
        for (const auto& e : db.provenance()) {
            doc["provenance"].push_back({{"seq", e.seq},
                                         {"rule", e.rule_id},
                                         {"occurrences", e.occurrences},
                                         {"status_before", std::string(to_string(e.status_before))},
                                         {"status_after", std::string(to_string(e.status_after))}});
        }
    }
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Matching, classification, promotion

std::optional<RuleMatch> match_rule(const RuleDatabase& db, const Multiset& contents, const ProcessPoint& point) {
    const TransitionRule* best = nullptr;
    for (const auto& [id, rule] : db.rules()) {
        if (!rule.window.contains(point)) continue;
        bool ok = std::all_of(rule.reagents.begin(), rule.reagents.end(),
                              [&](const auto& kv) { return amount_of(contents, kv.first) > 0.0; });
        ok = ok && std::all_of(rule.catalysts.begin(), rule.catalysts.end(),
                               [&](const std::string& c) { return amount_of(contents, c) > 0.0; });
        if (!ok) continue;
        // ties keep the lowest rule id
        if (!best || rule.priority > best->priority) best = &rule;
    }
    if (!best) return std::nullopt;
    RuleMatch m;
    m.rule_id = best->id;
    m.extent = std::numeric_limits<double>::infinity();
    for (const auto& [sp, coef] : best->reagents) {
        double e = amount_of(contents, sp) / coef;
        if (e < m.extent) {
            m.extent = e;
            m.limiting = sp;
        }
    }
    return m;
}

HaltKind classify_outcome(const std::optional<RuleMatch>& match, const RuleDatabase& db, bool /*explore*/) {
    if (!match) return HaltKind::Fail;
    const auto* rule = db.find_rule(match->rule_id);
    if (!rule) return HaltKind::Fail;
    switch (rule->status) {
        case RuleStatus::Characterised: return HaltKind::Out;
        case RuleStatus::Predicted: return HaltKind::UOut;
        case RuleStatus::Novel: return HaltKind::NOut;
    }
    return HaltKind::Fail;
}

RuleDatabase promote(const RuleDatabase& db, const std::string& rule_id) {
    const auto* existing = db.find_rule(rule_id);
    if (!existing) throw RulesError("cannot promote unknown rule '" + rule_id + "'");
    TransitionRule rule = *existing;
    PromotionEvent ev;
    ev.seq = db.provenance().empty() ? 1 : db.provenance().back().seq + 1;
    ev.rule_id = rule_id;
    ev.status_before = rule.status;
    rule.occurrences += 1;
    if (rule.status != RuleStatus::Characterised && rule.occurrences >= kPromotionThreshold) {
        rule.status = RuleStatus::Characterised;
    }
    ev.occurrences = rule.occurrences;
    ev.status_after = rule.status;
    return db.with_updated_rule(rule, ev);
}

std::optional<ExplorationResult> explore(const RuleDatabase& latent, const Multiset& contents,
                                         const ProcessPoint& point, Rng& rng, int samples) {
    for (int i = 0; i < samples; ++i) {
        ProcessPoint p;
        p.temp = point.temp + rng.normal(0.0, 15.0);
        p.duration = std::max(1.0, point.duration) * std::exp(rng.normal(0.0, 0.5));
        auto m = match_rule(latent, contents, p);
        if (!m) continue;
        TransitionRule found = *latent.find_rule(m->rule_id);
        found.status = RuleStatus::Novel;
        found.occurrences = 0;
        return ExplorationResult{found, p};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Planning

namespace {

std::set<std::string> relevant_rules(const RuleDatabase& db, const std::string& target,
                                     const std::set<std::string>& stock) {
    std::set<std::string> needed{target}, relevant;
    std::vector<std::string> frontier{target};
    while (!frontier.empty()) {
        std::string sp = frontier.back();
        frontier.pop_back();
        for (const auto& [id, rule] : db.rules()) {
            if (!rule.products.count(sp) || !relevant.insert(id).second) continue;
            auto want = [&](const std::string& s) {
                if (!stock.count(s) && needed.insert(s).second) frontier.push_back(s);
            };
            for (const auto& [r, _] : rule.reagents) want(r);
            for (const auto& c : rule.catalysts) want(c);
        }
    }
    return relevant;
}

bool inputs_available(const TransitionRule& rule, const std::set<std::string>& available) {
    for (const auto& [r, _] : rule.reagents) {
        if (!available.count(r)) return false;
    }
    for (const auto& c : rule.catalysts) {
        if (!available.count(c)) return false;
    }
    return true;
}

}  // namespace

Pathway plan_pathway(const RuleDatabase& db, const std::string& target, const std::set<std::string>& stock,
                     int max_depth) {
    const Species* t = db.find_species(target);
    if (!t) throw PlanError(PlanErrorKind::UnknownTarget, "unknown target species '" + target + "'");
    if (!t->stable) throw PlanError(PlanErrorKind::UnstableTarget, "target '" + target + "' is not stable");
    Pathway path;
    path.target = target;
    if (stock.count(target)) return path;

    std::vector<const TransitionRule*> candidates;
    for (const auto& id : relevant_rules(db, target, stock)) candidates.push_back(db.find_rule(id));

    std::vector<const TransitionRule*> seq;
    // Depth-first in lexicographic rule order under iterative deepening.
    std::function<bool(std::set<std::string>&, int)> search = [&](std::set<std::string>& available, int remaining) {
        if (available.count(target)) return true;
        if (remaining == 0) return false;
        for (const auto* rule : candidates) {
            if (!inputs_available(*rule, available)) continue;
            if (remaining == 1 && !rule->products.count(target)) continue;
            std::vector<std::string> added;
            for (const auto& [p, _] : rule->products) {
                if (available.insert(p).second) added.push_back(p);
            }
            if (added.empty()) continue;
            seq.push_back(rule);
            if (search(available, remaining - 1)) return true;
            seq.pop_back();
            for (const auto& p : added) available.erase(p);
        }
        return false;
    };
    for (int depth = 1; depth <= max_depth; ++depth) {
        std::set<std::string> available = stock;
        seq.clear();
        if (search(available, depth)) {
            for (const auto* rule : seq) {
                path.steps.push_back({rule->id, rule->reagents, rule->epsilon});
            }
            path.expected_perfect_fraction = perfect_copy_fraction(path);
            return path;
        }
    }
    throw PlanError(PlanErrorKind::Unreachable, "target '" + target + "' is unreachable within depth " +
                                                    std::to_string(max_depth));
}

double perfect_copy_fraction(const Pathway& pathway) {
    double f = 1.0;
    for (const auto& s : pathway.steps) f *= (1.0 - s.epsilon);
    return f;
}

}  // namespace chemputer::rules
