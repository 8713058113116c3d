#include <doctest.h>

#include "chemputer/chemlang.hpp"
#include "chemputer/chempiler.hpp"
#include "chemputer/dec.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace chemputer;

namespace {

HardwareGraph fixture_graph() { return load_graph(testing::read_text(testing::fixture_path("default_fig4.graph"))); }

bool no_negative_amounts(const cstm::MachineState& s) {
    for (const auto& c : s.tape) {
        for (const auto& [sp, v] : c.contents) {
            if (!(v > 0)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("mass is conserved on random programs in every execution mode") {
    auto db = testing::fixture_rules("tiny.rules");
    auto graph = fixture_graph();
    int completed = 0;
    int corrected = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        CAPTURE(seed);
        auto text = testing::random_program_text(seed);
        auto prog = chemlang::parse_program(text);
        CHECK(chemlang::parse_program(chemlang::format_program(prog)) == prog);

        auto abstract_run = cstm::run(prog, db, cstm::kDefaultBudget, {.seed = seed});
        CHECK(cstm::mass_ledger(abstract_run.trace).residual <= 1e-9);
        CHECK(no_negative_amounts(abstract_run.trace.final_state));
        completed += abstract_run.trace.halt.kind == rules::HaltKind::Out;

        auto cp = chempiler::chempile(prog, graph, db);
        REQUIRE(cp.plan);
        auto compiled_run = chempiler::execute_plan(*cp.plan, db);
        CHECK(cstm::mass_ledger(compiled_run.trace).residual <= 1e-9);
        auto eq = chempiler::lowering_equivalent(abstract_run.trace, compiled_run.trace);
        CHECK_MESSAGE(eq.equivalent, eq.detail);

        dec::DecOptions opts;
        opts.injector.epsilon = 0.3;
        opts.seed = seed;
        auto dec_run = dec::run_with_dec(prog, db, seed % 4 == 0 ? &graph : nullptr, opts);
        CHECK(cstm::mass_ledger(dec_run.result.trace).residual <= 1e-9);
        CHECK(dec_run.stats.restores_exact);
        corrected += dec_run.stats.tunes + dec_run.stats.redoses + dec_run.stats.reverts > 0;
    }
    CHECK(completed > 300);
    CHECK(corrected > 100);
}

TEST_CASE("planner agrees with exhaustive enumeration") {
    int reachable = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        CAPTURE(seed);
        auto pc = testing::random_plan_case(seed);
        CHECK(pc.db.species().size() <= 6 + pc.db.rules().size());
        CHECK(pc.db.rules().size() <= 5);
        auto oracle = testing::brute_force_shortest(pc.db, pc.target, pc.stock, 4);
        std::optional<rules::Pathway> path;
        try {
            path = rules::plan_pathway(pc.db, pc.target, pc.stock, 4);
        } catch (const rules::PlanError& e) {
            CHECK(e.kind() == rules::PlanErrorKind::Unreachable);
        }
        REQUIRE(path.has_value() == oracle.has_value());
        if (!path) continue;
        ++reachable;
        CHECK(static_cast<int>(path->steps.size()) == *oracle);

        // replaying the pathway on the species sets reaches the target
        auto have = pc.stock;
        for (const auto& step : path->steps) {
            const auto* rule = pc.db.find_rule(step.rule_id);
            REQUIRE(rule);
            for (const auto& [s, _] : rule->reagents) CHECK(have.count(s));
            for (const auto& [p, _] : rule->products) have.insert(p);
        }
        CHECK(have.count(pc.target));

        auto run = cstm::run(chempiler::pathway_program(*path, pc.db), pc.db);
        CHECK_MESSAGE(run.trace.halt.kind != rules::HaltKind::Fail, run.trace.halt.reason);
        CHECK(cstm::mass_ledger(run.trace).residual <= 1e-9);
    }
    CHECK(reachable >= 20);
    CHECK(reachable <= 180);
}

TEST_CASE("correction without injected error is a no-op on random programs") {
    auto db = testing::fixture_rules("tiny.rules");
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        CAPTURE(seed);
        auto prog = chemlang::parse_program(testing::random_program_text(seed));
        auto plain = cstm::run(prog, db);
        dec::DecOptions opts;
        opts.policy.sensor_noise_sd = 0.0;
        auto dec_run = dec::run_with_dec(prog, db, nullptr, opts);
        CHECK(dec_run.result.trace.halt.kind == plain.trace.halt.kind);
        CHECK(dec_run.stats.deviations == 0);
        CHECK(dec_run.result.trace.final_state.product() == plain.trace.final_state.product());
    }
}
