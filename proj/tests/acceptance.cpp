// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <unistd.h>
#include <sstream>
#include <string>
#include <vector>

#include "chemputer/assembly.hpp"
#include "chemputer/chemlang.hpp"
#include "chemputer/chempiler.hpp"
#include "chemputer/cstm.hpp"
#include "chemputer/dec.hpp"
#include "chemputer/graph.hpp"
#include "chemputer/primitives.hpp"
#include "chemputer/rules.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace chemputer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && pass) {
            pass = false;
            detail = what;
        }
    }
};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(b), 1e-300); }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

HardwareGraph default_graph() { return load_graph(testing::read_text(testing::fixture_path("default_fig4.graph"))); }

Outcome survival_claim() {
    Outcome o;
    double s = assembly::survival_fraction(0.05, 20);
    double oracle = std::exp(20.0 * std::log1p(-0.05));
    o.require(std::abs(s - 0.358486) <= 1e-6, "survival " + fmt(s));
    o.require(std::abs(s - oracle) <= 1e-12, "survival differs from log-space oracle");
    o.require(s < 0.40, "survival not below 0.40");
    o.detail = o.pass ? "survival_fraction(0.05, 20) = " + fmt(s) : o.detail;
    return o;
}

Outcome n_min_grid() {
    Outcome o;
    int cases = 0;
    for (double phi : {1e6, 1e8}) {
        for (double eps : {0.0, 0.01, 0.05, 0.2}) {
            for (int a : {1, 20, 120}) {
                auto r = assembly::n_min(assembly::DetectabilitySpec::constant(phi, a, eps));
                double oracle = phi * std::exp(-a * std::log1p(-eps));
                o.require(!r.infinite && rel_close(r.value, oracle, 1e-12),
                          "n_min mismatch at phi=" + fmt(phi) + " eps=" + fmt(eps) + " a=" + std::to_string(a));
                double back = assembly::max_error_for(phi, a, r.value);
                auto again = assembly::n_min(assembly::DetectabilitySpec::constant(phi, a, back));
                o.require(rel_close(again.value, r.value, 1e-9), "n_min round trip at eps=" + fmt(eps));
                if (eps > 0) o.require(rel_close(back, eps, 1e-9), "max_error_for drift at eps=" + fmt(eps));
                else o.require(std::abs(back) <= 1e-12, "max_error_for nonzero at eps=0");
                ++cases;
            }
        }
    }
    if (o.pass) o.detail = std::to_string(cases) + " grid points";
    return o;
}

Outcome monte_carlo_shape() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    assembly::MonteCarloConfig cfg;
    cfg.seed = 42;
    auto res = assembly::monte_carlo(cfg);
    o.require(res.mean_N.size() == 10, "expected 10 curves");
    for (std::size_t r = 0; r < res.mean_N.size(); ++r) {
        const auto& row = res.mean_N[r];
        o.require(static_cast<int>(row.size()) == cfg.ai_max, "curve length");
        for (std::size_t a = 1; a < row.size(); ++a) o.require(row[a] <= row[a - 1], "curve increases");
        if (r + 1 < res.mean_N.size()) {
            for (std::size_t a = 0; a < row.size(); ++a) {
                o.require(res.mean_N[r + 1][a] <= row[a], "curves out of order at row " + std::to_string(r));
            }
        }
    }

    assembly::MonteCarloConfig flat;
    flat.n0 = 1e6;
    flat.eps0 = {0.01, 0.05, 0.2};
    flat.k_growth = 0.0;
    flat.systematic_sd = 0.0;
    flat.ai_max = 40;
    flat.trajectories = 16;
    flat.seed = 7;
    auto deg = assembly::monte_carlo(flat);
    for (std::size_t r = 0; r < flat.eps0.size(); ++r) {
        for (int a = 1; a <= flat.ai_max; ++a) {
            double oracle = flat.n0 * std::pow(1.0 - flat.eps0[r], a);
            o.require(rel_close(deg.mean_N[r][a - 1], oracle, 1e-12), "degenerate curve off analytic law");
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 30.0, "runtime " + fmt(secs) + " s");
    if (o.pass) o.detail = "10 curves, degenerate exact, " + fmt(secs) + " s";
    return o;
}

Outcome golden_expansions() {
    Outcome o;
    using P = PrimitiveKind;
    const std::vector<std::pair<UnitOpKind, std::vector<P>>> golden = {
        {UnitOpKind::Separate, {P::AM, P::AE, P::SM}},
        {UnitOpKind::Dry, {P::AE, P::SM}},
        {UnitOpKind::Crystallise, {P::AE, P::SE, P::SM}},
        {UnitOpKind::Distil, {P::AE, P::SM, P::SE, P::AM}},
        {UnitOpKind::ReactHot, {P::AM, P::AE}},
        {UnitOpKind::ReactCold, {P::AM, P::SE}},
        {UnitOpKind::Sublime, {P::SM, P::AE, P::SE, P::AM}},
    };
    for (const auto& [kind, expected] : golden) {
        UnitOperation op;
        op.kind = kind;
        op.params["vessel"] = Symbol{"V"};
        op.params["to"] = Symbol{"W2"};
        std::vector<P> got;
        for (const auto& p : expand_unit_op(op)) got.push_back(p.kind);
        o.require(got == expected, "expansion of " + std::string(to_string(kind)));
        o.require(primitive_sequence(kind) == expected, "sequence of " + std::string(to_string(kind)));
    }
    if (o.pass) o.detail = "7 sequences";
    return o;
}

Outcome conservation() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    auto db = testing::fixture_rules("tiny.rules");
    auto graph = default_graph();
    double worst = 0.0;
    int compiled = 0;
    const int n = 1000;
    for (int i = 0; i < n && o.pass; ++i) {
        auto prog = chemlang::parse_program(testing::random_program_text(static_cast<std::uint64_t>(i)));
        auto abstract_run = cstm::run(prog, db, cstm::kDefaultBudget, {.seed = static_cast<std::uint64_t>(i)});
        double r1 = cstm::mass_ledger(abstract_run.trace).residual;

        auto cp = chempiler::chempile(prog, graph, db);
        o.require(cp.plan.has_value(), "program " + std::to_string(i) + " did not compile");
        double r2 = 0.0;
        if (cp.plan) {
            r2 = cstm::mass_ledger(chempiler::execute_plan(*cp.plan, db).trace).residual;
            ++compiled;
        }

        dec::DecOptions opts;
        opts.injector.epsilon = 0.3;
        opts.seed = static_cast<std::uint64_t>(i);
        double r3 = cstm::mass_ledger(dec::run_with_dec(prog, db, nullptr, opts).result.trace).residual;

        worst = std::max({worst, r1, r2, r3});
        o.require(r1 <= 1e-9 && r2 <= 1e-9 && r3 <= 1e-9, "residual above 1e-9 for program " + std::to_string(i));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
    if (o.pass) {
        o.detail = std::to_string(n) + " programs, " + std::to_string(compiled) + " compiled, worst residual " +
                   fmt(worst) + ", " + fmt(secs) + " s";
    }
    return o;
}

Outcome halting_semantics() {
    Outcome o;
    auto predicted = testing::fixture_program("predicted.chem");
    auto first = cstm::run(predicted, testing::fixture_rules("predicted.rules"));
    o.require(first.trace.halt.kind == rules::HaltKind::UOut, "first predicted run is not q_uout");
    // persist the promoted database as the CLI would, then run again
    auto persisted = rules::load_rules(rules::save_rules(first.db));
    auto second = cstm::run(predicted, persisted);
    o.require(second.trace.halt.kind == rules::HaltKind::Out, "second predicted run is not q_out");
    o.require(second.db.find_rule("r1")->status == rules::RuleStatus::Characterised, "rule not promoted");

    auto tiny = testing::fixture_rules("tiny.rules");
    auto none = cstm::run(testing::fixture_program("norule.chem"), tiny);
    o.require(none.trace.halt.kind == rules::HaltKind::Fail, "no-rule fixture did not fail");

    auto starved = cstm::run(testing::fixture_program("tiny_hot.chem"), tiny, 3);
    o.require(starved.trace.halt.kind == rules::HaltKind::Fail, "budget exhaustion did not fail");
    o.require(starved.trace.halt.reason == "budget_exhausted", "budget halt reason " + starved.trace.halt.reason);
    if (o.pass) o.detail = "q_uout then q_out; no-rule q_fail; budget q_fail";
    return o;
}

Outcome planner_oracle() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    int reachable = 0;
    for (int i = 0; i < 200 && o.pass; ++i) {
        auto pc = testing::random_plan_case(static_cast<std::uint64_t>(i));
        auto oracle = testing::brute_force_shortest(pc.db, pc.target, pc.stock, 4);
        std::optional<rules::Pathway> path;
        try {
            path = rules::plan_pathway(pc.db, pc.target, pc.stock, 4);
        } catch (const rules::PlanError& e) {
            o.require(e.kind() == rules::PlanErrorKind::Unreachable, "unexpected plan error in case " +
                                                                         std::to_string(i));
        }
        o.require(path.has_value() == oracle.has_value(), "reachability disagrees in case " + std::to_string(i));
        if (!path || !oracle) continue;
        ++reachable;
        o.require(static_cast<int>(path->steps.size()) == *oracle, "pathway not minimal in case " + std::to_string(i));
        auto run = cstm::run(chempiler::pathway_program(*path, pc.db), pc.db);
        o.require(run.trace.halt.kind != rules::HaltKind::Fail,
                  "pathway of case " + std::to_string(i) + " failed: " + run.trace.halt.reason);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 30.0, "runtime " + fmt(secs) + " s");
    if (o.pass) o.detail = "200 databases, " + std::to_string(reachable) + " reachable";
    return o;
}

Outcome lowering() {
    Outcome o;
    auto graph = default_graph();
    auto db = testing::fixture_rules("corpus.rules");
    auto pinned = route(graph, "R1", "RX1");
    o.require(pinned && *pinned == std::vector<std::string>{"R1", "V1", "P1", "V2", "RX1"}, "R1->RX1 route");
    std::size_t compared = 0;
    for (const char* name : {"atropine_3step.chem", "indole_1step.chem", "alkynol_1step.chem"}) {
        auto prog = testing::fixture_program(name);
        auto abstract_run = cstm::run(prog, db);
        auto cp = chempiler::chempile(prog, graph, db);
        o.require(cp.plan.has_value(), std::string(name) + " did not compile");
        if (!cp.plan) continue;
        for (const auto& t : cp.plan->transfers) {
            o.require(chempiler::route_valid(graph, t.route), std::string(name) + " has an invalid route");
        }
        auto compiled_run = chempiler::execute_plan(*cp.plan, db);
        auto eq = chempiler::lowering_equivalent(abstract_run.trace, compiled_run.trace);
        o.require(eq.equivalent, std::string(name) + ": " + eq.detail);
        compared += eq.compared;
    }
    if (o.pass) o.detail = "3 fixtures, " + std::to_string(compared) + " records compared";
    return o;
}

Outcome dec_benefit() {
    Outcome o;
    auto db = testing::fixture_rules("tiny.rules");
    auto prog = testing::fixture_program("tiny_two_step.chem");
    auto graph = default_graph();
    auto policy = dec::load_policy(testing::read_text(testing::fixture_path("default_policy.json")));

    auto noisy = dec::compare_paired(prog, db, &graph, policy, 0.3, 200, 2024);
    o.require(noisy.dec_rate() > noisy.plain_rate(), "correction does not raise the q_out rate");
    o.require(noisy.p_value < 0.01, "p = " + fmt(noisy.p_value));

    auto clean = dec::compare_paired(prog, db, &graph, policy, 0.0, 200, 2024);
    o.require(clean.dec_rate() == 1.0 && clean.plain_rate() == 1.0, "eps = 0 rates are not both 1");

    // a scripted major failure forces a rollback to the last checkpoint
    dec::DecOptions opts;
    opts.policy = policy;
    opts.injector.scripted = {{2, 0.3}};
    auto reverted = dec::run_with_dec(prog, db, &graph, opts);
    o.require(reverted.stats.reverts >= 1, "scripted failure did not revert");
    o.require(reverted.stats.restores_exact, "restore was not exact");

    auto machine = cstm::init_machine(prog, cstm::kDefaultBudget, &db);
    auto work = db;
    for (int i = 0; i < 6; ++i) cstm::step(machine, work);
    auto cp = dec::take_checkpoint(machine, 1);
    auto later = machine;
    for (int i = 0; i < 4; ++i) cstm::step(later, work);
    auto restored = dec::restore_checkpoint(later, cp);
    o.require(dec::matches_checkpoint(restored, cp), "restored state differs from checkpoint");
    o.require(restored.tape.size() == cp.state.tape.size(), "tape length changed");
    for (std::size_t c = 1; c < restored.tape.size(); ++c) {
        o.require(restored.tape[c] == cp.state.tape[c], "cell " + std::to_string(c) + " not bit-identical");
    }
    if (o.pass) {
        o.detail = "DEC " + fmt(noisy.dec_rate()) + " vs " + fmt(noisy.plain_rate()) + " (p=" + fmt(noisy.p_value) +
                   "); eps 0 both 1";
    }
    return o;
}

Outcome step_statistics() {
    Outcome o;
    auto atr = chemlang::classify_steps(testing::fixture_program("atropine_3step.chem"));
    o.require(atr.cumulative == std::vector<int>{20, 34, 47}, "atropine cumulative counts");
    o.require(chemlang::classify_steps(testing::fixture_program("indole_1step.chem")).total() == 18, "indole total");
    o.require(chemlang::classify_steps(testing::fixture_program("alkynol_1step.chem")).total() == 13, "alkynol total");
    for (int t : {4, 9, 16}) {
        std::vector<double> x, y;
        for (int k = 1; k <= 8; ++k) {
            x.push_back(k);
            y.push_back(chemlang::classify_steps(chemlang::synthetic_program(k, t)).total());
        }
        auto fit = chemlang::linear_fit(x, y);
        o.require(fit.defined && std::abs(fit.slope - t) <= 1e-9, "synthetic slope for template " + std::to_string(t));
        o.require(std::abs(fit.r_squared - 1.0) <= 1e-12, "synthetic R^2 for template " + std::to_string(t));
    }
    if (o.pass) o.detail = "(20, 34, 47), 18, 13; synthetic slopes exact";
    return o;
}

Outcome assembly_bounds() {
    Outcome o;
    for (std::int64_t b = 2; b <= (1 << 16); ++b) {
        auto bounds = assembly::assembly_bounds(b);
        int oracle = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(b - 1)));
        if (bounds.min != oracle || bounds.max != b - 1 || bounds.min > bounds.max) {
            o.require(false, "bounds wrong at B=" + std::to_string(b));
            break;
        }
    }
    auto eight = assembly::assembly_bounds(8);
    o.require(eight.min == 3 && eight.max == 7, "B=8");
    bool rejected = false;
    try {
        testing::fixture_rules("bad_assembly.rules");
    } catch (const rules::RulesError&) {
        rejected = true;
    }
    o.require(rejected, "out-of-bounds assembly index accepted");
    o.require(!testing::fixture_rules("corpus.rules").species().empty(), "corpus rules rejected");
    if (o.pass) o.detail = "B in [2, 65536]; B=8 -> (3, 7); bad fixture rejected";
    return o;
}

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

Outcome cli_determinism() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    const std::string cli = CHEMPUTER_CLI;
    auto fx = [](const std::string& n) { return shell_quote(testing::fixture_path(n)); };
    auto base = fs::temp_directory_path() / ("chemputer_accept_" + std::to_string(::getpid()));

    // each command writes into OUT/ and stdout; both are compared byte for byte
    const std::vector<std::string> commands = {
        "parse " + fx("atropine_3step.chem") + " --out OUT/p.chem",
        "validate " + fx("atropine_3step.chem") + " --graph " + fx("default_fig4.graph") + " --out OUT/v.json",
        "run " + fx("tiny_two_step.chem") + " --rules " + fx("tiny.rules") + " --seed 5 --trace OUT/t.jsonl --out OUT/r.txt",
        "run " + fx("atropine_3step.chem") + " --rules " + fx("corpus.rules") + " --compiled --trace OUT/t.jsonl",
        "plan --rules " + fx("tiny.rules") + " --target T --stock A,B,C --program OUT/p.chem --out OUT/plan.json",
        "compile " + fx("atropine_3step.chem") + " --rules " + fx("corpus.rules") + " --out OUT/c.json",
        "stats " + fx("atropine_3step.chem") + " " + fx("indole_1step.chem") + " " + fx("alkynol_1step.chem") +
            " --synthetic 6 --template 7 --out OUT/s.csv",
        "mc --config " + fx("mc_default.json") + " --out OUT/mc.csv --svg OUT/mc.svg",
        "dec-run " + fx("tiny_two_step.chem") + " --rules " + fx("tiny.rules") + " --inject-eps 0.3 --seed 9 --trace OUT/d.jsonl --out OUT/d.txt",
        "dec-run " + fx("tiny_two_step.chem") + " --rules " + fx("tiny.rules") + " --inject-eps 0.3 --seeds 50 --compare --out OUT/cmp.csv",
    };

    auto snapshot = [&](const fs::path& dir, const std::string& stdout_text) {
        std::string all = stdout_text;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) all += "\n==" + f.filename().string() + "==\n" + testing::read_text(f.string());
        return all;
    };

    int idx = 0;
    for (const auto& cmd : commands) {
        std::string results[2];
        int codes[2];
        for (int rep = 0; rep < 2; ++rep) {
            fs::path dir = base / (std::to_string(idx) + "_" + std::to_string(rep));
            fs::create_directories(dir);
            std::string line = cmd;
            for (std::size_t p; (p = line.find("OUT/")) != std::string::npos;) {
                line.replace(p, 4, shell_quote(dir.string()) + "/");
            }
            std::string out;
            codes[rep] = testing::run_command("cd " + shell_quote(dir.string()) + " && " + shell_quote(cli) + " " +
                                                  line + " 2>/dev/null",
                                              &out);
            // outputs name the run directory; neutralise it before comparing
            std::string text = snapshot(dir, out);
            for (std::size_t p; (p = text.find(dir.string())) != std::string::npos;) text.replace(p, dir.string().size(), "OUT");
            results[rep] = text;
        }
        o.require(codes[0] == codes[1], "exit status differs for: " + cmd);
        o.require(codes[0] == 0, "command failed (" + std::to_string(codes[0]) + "): " + cmd);
        o.require(results[0] == results[1], "output differs for: " + cmd);
        ++idx;
    }
    fs::remove_all(base);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
    if (o.pass) o.detail = std::to_string(commands.size()) + " commands, " + fmt(secs) + " s";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"survival fraction at 5% over 20 steps", survival_claim},
        {"n_min closed form and inversion", n_min_grid},
        {"Monte Carlo decay curves", monte_carlo_shape},
        {"unit operation expansions", golden_expansions},
        {"mass conservation over random programs", conservation},
        {"halting set semantics", halting_semantics},
        {"planner against brute force", planner_oracle},
        {"lowering equivalence on the corpus", lowering},
        {"error correction benefit", dec_benefit},
        {"step classification regression", step_statistics},
        {"assembly index bounds", assembly_bounds},
        {"CLI determinism", cli_determinism},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << n << "] " << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
