#pragma once
// Species table, transition rule database and the operations built on it.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "chemputer/common.hpp"

namespace chemputer {
class Rng;
}

namespace chemputer::rules {

enum class RuleStatus { Characterised, Predicted, Novel };
std::string_view to_string(RuleStatus s);
std::optional<RuleStatus> rule_status_from_string(std::string_view s);

/// Members of the halting set.
enum class HaltKind { Out, UOut, NOut, Fail };
std::string_view to_string(HaltKind k);  // "q_out", ...
std::optional<HaltKind> halt_kind_from_string(std::string_view s);

struct Species {
    std::string id;
    std::string name;
    double molar_mass = 0.0;  // g/mol
    std::map<std::string, int> elements;
    bool stable = true;
    std::optional<int> assembly_index;
    std::optional<std::int64_t> bonds;

    bool operator==(const Species&) const = default;
};

struct ProcessPoint {
    double temp = kAmbientTemp;  // C
    double duration = 0.0;       // s

    bool operator==(const ProcessPoint&) const = default;
};

struct ProcessWindow {
    double temp_min = -200.0;
    double temp_max = 400.0;
    double time_min = 0.0;
    double time_max = 1e9;

    bool contains(const ProcessPoint& p) const {
        return p.temp >= temp_min && p.temp <= temp_max && p.duration >= time_min && p.duration <= time_max;
    }
    ProcessPoint midpoint() const { return {(temp_min + temp_max) / 2, (time_min + time_max) / 2}; }
    bool operator==(const ProcessWindow&) const = default;
};

struct TransitionRule {
    std::string id;
    std::map<std::string, double> reagents;  // species -> stoichiometric coefficient
    std::set<std::string> catalysts;
    ProcessWindow window;
    std::map<std::string, double> products;
    double yield = 1.0;
    double epsilon = 0.0;
    RuleStatus status = RuleStatus::Characterised;
    int occurrences = 0;
    int priority = 0;
    /// Implicit species carrying the unmatched input mass (set at load; empty if balanced).
    std::string byproduct;

    bool operator==(const TransitionRule&) const = default;
};

struct PromotionEvent {
    std::uint64_t seq = 0;
    std::string rule_id;
    int occurrences = 0;
    RuleStatus status_before = RuleStatus::Predicted;
    RuleStatus status_after = RuleStatus::Predicted;

    bool operator==(const PromotionEvent&) const = default;
};

class RulesError : public Error {
public:
    using Error::Error;
};

class ConservationViolation : public RulesError {
public:
    ConservationViolation(std::string rule_id, std::string element, const std::string& msg)
        : RulesError(msg), rule_id_(std::move(rule_id)), element_(std::move(element)) {}
    const std::string& rule_id() const { return rule_id_; }
    const std::string& element() const { return element_; }

private:
    std::string rule_id_;
    std::string element_;
};

/// Immutable snapshot; "mutating" operations return a new database.
class RuleDatabase {
public:
    RuleDatabase() = default;

    /// Validates species invariants and per-rule element conservation, and
    /// derives byproduct species. Throws RulesError / ConservationViolation.
    static RuleDatabase create(std::vector<Species> species, std::vector<TransitionRule> rules,
                               std::vector<PromotionEvent> provenance = {});

    const std::map<std::string, Species>& species() const { return species_; }
    const std::map<std::string, TransitionRule>& rules() const { return rules_; }
    const std::vector<PromotionEvent>& provenance() const { return provenance_; }

    const Species* find_species(const std::string& id) const;
    const TransitionRule* find_rule(const std::string& id) const;
    double molar_mass_or(const std::string& id, double fallback) const;

    /// Copy with `rule` added (validated; replaces nothing). Species the rule
    /// names but this database lacks are taken from `species_source`.
    RuleDatabase with_rule(TransitionRule rule, const RuleDatabase* species_source = nullptr) const;
    /// Copy with `rule` replacing the rule of the same id.
    RuleDatabase with_updated_rule(const TransitionRule& rule, std::optional<PromotionEvent> event) const;

    bool operator==(const RuleDatabase&) const = default;

private:
    std::map<std::string, Species> species_;
    std::map<std::string, TransitionRule> rules_;
    std::vector<PromotionEvent> provenance_;
};

/// Species invariant check (molar mass, assembly index bounds). Empty if valid.
std::vector<std::string> check_species(const Species& s);

RuleDatabase load_rules(std::string_view json_text);
std::string save_rules(const RuleDatabase& db);

struct RuleMatch {
    std::string rule_id;
    double extent = 0.0;  // mol of rule applications supported by the limiting reagent
    std::string limiting;
};

/// Best rule whose reagents and catalysts are present in `contents` and
/// whose window contains `point`. Ties: higher priority, then smaller id.
std::optional<RuleMatch> match_rule(const RuleDatabase& db, const Multiset& contents, const ProcessPoint& point);

/// characterised -> q_out, predicted -> q_uout, novel -> q_nout, no match -> q_fail.
/// A no-match that remains after exploration is q_fail whether or not
/// `explore` is set.
HaltKind classify_outcome(const std::optional<RuleMatch>& match, const RuleDatabase& db, bool explore);

inline constexpr int kPromotionThreshold = 2;

/// Counts an occurrence; predicted/novel rules become characterised once
/// they reach kPromotionThreshold occurrences. Throws RulesError for unknown ids.
RuleDatabase promote(const RuleDatabase& db, const std::string& rule_id);

struct ExplorationResult {
    TransitionRule rule;  // status = novel
    ProcessPoint point;   // condition point at which it was found
};

/// Seeded sampling of condition points around `point`, looking for a rule in
/// `latent` (hidden from the planner) that matches `contents`.
std::optional<ExplorationResult> explore(const RuleDatabase& latent, const Multiset& contents,
                                         const ProcessPoint& point, Rng& rng, int samples = 32);

struct PathwayStep {
    std::string rule_id;
    std::map<std::string, double> inputs;  // species -> mol per unit extent
    double epsilon = 0.0;

    bool operator==(const PathwayStep&) const = default;
};

struct Pathway {
    std::string target;
    std::vector<PathwayStep> steps;
    double expected_perfect_fraction = 1.0;

    bool operator==(const Pathway&) const = default;
};

enum class PlanErrorKind { Unreachable, UnstableTarget, UnknownTarget };

class PlanError : public Error {
public:
    PlanError(PlanErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    PlanErrorKind kind() const { return kind_; }

private:
    PlanErrorKind kind_;
};

inline constexpr int kDefaultPlanDepth = 12;

/// Minimal-length rule sequence producing `target` from `stock`
/// (lexicographically smallest rule-id sequence among ties).
Pathway plan_pathway(const RuleDatabase& db, const std::string& target, const std::set<std::string>& stock,
                     int max_depth = kDefaultPlanDepth);

/// Product of (1 - eps_k) over the pathway's steps.
double perfect_copy_fraction(const Pathway& pathway);

}  // namespace chemputer::rules
