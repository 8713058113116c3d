#pragma once
// Dynamic error correction: after every transformation the loop senses the
// vessel, compares the reading against the rule's expected yield profile,
// grades the gap and applies a bounded corrective action. Validated states
// are checkpointed; a major failure restores the last one and replays.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemputer/cstm.hpp"
#include "chemputer/graph.hpp"
#include "chemputer/rng.hpp"

namespace chemputer::dec {

class DecError : public Error {
public:
    using Error::Error;
};

enum class SensorKind { Photon, Conductivity, Temperature, Chromatograph };
enum class Observable { YieldFraction, Purity, Temperature };
std::string_view to_string(SensorKind k);
std::string_view to_string(Observable o);

struct SensorModel {
    SensorKind kind = SensorKind::Photon;
    double noise_sd = 0.0;
    Observable observable = Observable::YieldFraction;
};

/// Quantities a sensor can read off a vessel. Absent means undefined.
struct VesselView {
    std::optional<double> yield_fraction;
    std::optional<double> purity;
    double temperature = kAmbientTemp;
};

/// `yield_fraction` is the achieved yield of the last transformation, if any.
VesselView view_of(const cstm::MachineState& state, const std::string& vessel,
                   std::optional<double> yield_fraction = std::nullopt);

/// True value plus Gaussian noise. Throws DecError if the observable is undefined.
double sample_sensor(const VesselView& view, const SensorModel& sensor, Rng& rng);

/// Linear ramp to the declared yield over the declared duration.
double expected_yield(const rules::TransitionRule& rule, double elapsed, double duration);

enum class Severity { None, Minor, Intermediate, Major };
std::string_view to_string(Severity s);

enum class ActionKind { Tune, Redose, Revert, Escalate };
std::string_view to_string(ActionKind k);

struct CorrectionPolicy {
    double minor_threshold = 0.05;
    double intermediate_threshold = 0.15;
    double major_threshold = 0.35;
    int max_tunes = 3;
    int max_redoses = 2;
    int max_reverts = 2;
    double tune_delta_temp = 5.0;
    double redose_fraction = 0.25;
    double extend_time = 60.0;
    double sensor_noise_sd = 0.01;
    bool enabled = true;
    std::map<Severity, ActionKind> actions{
        {Severity::Minor, ActionKind::Tune},
        {Severity::Intermediate, ActionKind::Redose},
        {Severity::Major, ActionKind::Revert},
    };

    void validate() const;  // throws DecError
};

CorrectionPolicy load_policy(const std::string& json_text);
std::string policy_to_json(const CorrectionPolicy& p);

struct Deviation {
    double observed = 0.0;
    double expected = 0.0;
    double relative_gap = 0.0;
    std::uint64_t step_ref = 0;
};

double relative_gap(double observed, double expected);
std::optional<Deviation> detect_deviation(double reading, double expected, const CorrectionPolicy& policy,
                                          std::uint64_t step_ref = 0);
Severity classify_severity(const Deviation& dev, const CorrectionPolicy& policy);
Severity classify_gap(double gap, const CorrectionPolicy& policy);

struct Budgets {
    int tunes = 0;
    int redoses = 0;
    int reverts = 0;
};

struct Action {
    ActionKind kind = ActionKind::Escalate;
    double delta_temp = 0.0;
    double delta_time = 0.0;
    double redose_fraction = 0.0;
};

/// Action for `sev` given the interventions already spent. Escalate once the
/// relevant budget is used up.
Action corrective_action(Severity sev, const CorrectionPolicy& policy, const Budgets& used);

/// Per-transformation yield degradation. With a script, only the listed
/// (1-based) transformation attempts are degraded, by the given factor.
struct ErrorInjector {
    double epsilon = 0.0;
    std::map<int, double> scripted;
    double low = 0.3;
    double high = 0.97;

    double factor(int attempt, Rng& rng) const;
};

struct Checkpoint {
    cstm::MachineState state;
    int validated_reactions = 0;
};

Checkpoint take_checkpoint(const cstm::MachineState& state, int validated_reactions);

/// Rolls `current` back to `cp`. Everything outside the waste cell is dumped to
/// waste and the checkpoint contents are credited back as input. Step count, ledger, outcome and reactions carry over.
cstm::MachineState restore_checkpoint(const cstm::MachineState& current, const Checkpoint& cp);

/// Material state of `state` equals the checkpoint's (waste and counters aside).
bool matches_checkpoint(const cstm::MachineState& state, const Checkpoint& cp);

struct DecStats {
    int transformations = 0;
    int deviations = 0;
    int tunes = 0;
    int redoses = 0;
    int reverts = 0;
    int checkpoints = 0;
    bool restores_exact = true;
};

struct DecRun {
    cstm::RunResult result;
    DecStats stats;
};

struct DecOptions {
    CorrectionPolicy policy;
    ErrorInjector injector;
    std::uint64_t seed = 0;
    std::uint64_t budget = cstm::kDefaultBudget * 10;
};

/// Runs `prog` with correction. With a graph the program is compiled and the
/// lowered plan executed; without one the abstract machine runs directly.
/// Throws PreconditionError when the program cannot be compiled onto `graph`.
DecRun run_with_dec(const ChemProgram& prog, const rules::RuleDatabase& db, const HardwareGraph* graph,
                    const DecOptions& opts);

struct PairedComparison {
    int seeds = 0;
    int dec_out = 0;
    int plain_out = 0;
    int dec_only = 0;    // discordant: q_out with correction only
    int plain_only = 0;  // discordant: q_out without correction only
    double p_value = 1.0;

    double dec_rate() const { return seeds ? static_cast<double>(dec_out) / seeds : 0.0; }
    double plain_rate() const { return seeds ? static_cast<double>(plain_out) / seeds : 0.0; }
};

/// Upper tail P(X >= k) for X ~ Binomial(n, 1/2).
double binomial_upper_tail(int k, int n);

/// Runs each seed with the policy enabled and disabled and compares q_out
/// frequencies with an exact one-sided sign test on discordant pairs.
PairedComparison compare_paired(const ChemProgram& prog, const rules::RuleDatabase& db, const HardwareGraph* graph,
                                const CorrectionPolicy& policy, double epsilon, int seeds, std::uint64_t master_seed);

std::string comparison_to_table(const PairedComparison& c, double epsilon);

}  // namespace chemputer::dec
