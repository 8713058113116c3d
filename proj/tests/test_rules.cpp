#include <doctest.h>

#include <cmath>

#include "chemputer/cstm.hpp"
#include "chemputer/rng.hpp"
#include "chemputer/rules.hpp"
#include "fixtures.hpp"

using namespace chemputer;
using namespace chemputer::rules;

namespace {

Species species(const std::string& id, double mm, std::map<std::string, int> el) {
    Species s;
    s.id = id;
    s.name = id;
    s.molar_mass = mm;
    s.elements = std::move(el);
    return s;
}

TransitionRule rule(const std::string& id, std::map<std::string, double> in, std::map<std::string, double> out) {
    TransitionRule r;
    r.id = id;
    r.reagents = std::move(in);
    r.products = std::move(out);
    r.window = {60, 100, 600, 7200};
    return r;
}

}  // namespace

TEST_CASE("rule files round-trip") {
    for (const char* name : {"tiny.rules", "corpus.rules", "predicted.rules", "tiny.latent.rules"}) {
        CAPTURE(name);
        auto db = testing::fixture_rules(name);
        CHECK(load_rules(save_rules(db)) == db);
        CHECK(save_rules(load_rules(save_rules(db))) == save_rules(db));
    }
}

TEST_CASE("rules must conserve elements") {
    std::vector<Species> sp = {species("A", 14, {{"C", 1}, {"H", 2}}), species("T", 44, {{"C", 1}, {"N", 1}})};
    try {
        RuleDatabase::create(sp, {rule("bad", {{"A", 1}}, {{"T", 1}})});
        FAIL("unbalanced rule accepted");
    } catch (const ConservationViolation& e) {
        CHECK(e.rule_id() == "bad");
        CHECK(e.element() == "N");
    }
    CHECK_THROWS_AS(RuleDatabase::create(sp, {rule("ghost", {{"A", 1}}, {{"Z", 1}})}), RulesError);
}

TEST_CASE("unmatched input mass becomes a byproduct") {
    auto db = testing::fixture_rules("corpus.rules");
    const auto* lac = db.find_rule("atr2_lactonisation");
    REQUIRE(lac);
    REQUIRE(!lac->byproduct.empty());
    const auto* by = db.find_species(lac->byproduct);
    REQUIRE(by);
    // element balance closes once the byproduct is counted
    std::map<std::string, double> balance;
    for (const auto& [s, c] : lac->reagents) {
        for (const auto& [el, n] : db.find_species(s)->elements) balance[el] += c * n;
    }
    for (const auto& [s, c] : lac->products) {
        for (const auto& [el, n] : db.find_species(s)->elements) balance[el] -= c * n;
    }
    for (const auto& [el, n] : by->elements) balance[el] -= n;
    for (const auto& [el, v] : balance) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("matching honours condition windows and priority") {
    auto db = testing::fixture_rules("tiny.rules");
    auto m = match_rule(db, {{"A", 0.1}, {"B", 0.05}}, {80, 3600});
    REQUIRE(m);
    CHECK(m->rule_id == "r1");
    CHECK(m->limiting == "B");
    CHECK(m->extent == doctest::Approx(0.05));
    CHECK_FALSE(match_rule(db, {{"A", 0.1}, {"B", 0.05}}, {120, 3600}));
    CHECK_FALSE(match_rule(db, {{"A", 0.1}, {"B", 0.05}}, {80, 60}));
    CHECK_FALSE(match_rule(db, {{"A", 0.1}}, {80, 3600}));
    auto both = match_rule(db, {{"A", 0.1}, {"B", 0.1}, {"X", 0.1}, {"C", 0.2}}, {80, 3600});
    REQUIRE(both);
    CHECK(both->rule_id == "r2");
}

TEST_CASE("outcome classification") {
    auto db = testing::fixture_rules("tiny.rules");
    RuleMatch m{"r1", 0.1, "A"};
    CHECK(classify_outcome(m, db, false) == HaltKind::Out);
    CHECK(classify_outcome(std::nullopt, db, false) == HaltKind::Fail);
    CHECK(classify_outcome(std::nullopt, db, true) == HaltKind::Fail);
    auto r1 = *db.find_rule("r1");
    r1.status = RuleStatus::Predicted;
    CHECK(classify_outcome(m, db.with_updated_rule(r1, std::nullopt), false) == HaltKind::UOut);
    r1.status = RuleStatus::Novel;
    CHECK(classify_outcome(m, db.with_updated_rule(r1, std::nullopt), false) == HaltKind::NOut);
}

TEST_CASE("repeated outcomes promote a rule") {
    auto db = testing::fixture_rules("predicted.rules");
    auto once = promote(db, "r1");
    CHECK(once.find_rule("r1")->status == RuleStatus::Predicted);
    CHECK(once.find_rule("r1")->occurrences == 1);
    auto twice = promote(once, "r1");
    CHECK(twice.find_rule("r1")->status == RuleStatus::Characterised);
    REQUIRE(twice.provenance().size() == 2);
    CHECK(twice.provenance()[0].status_after == RuleStatus::Predicted);
    CHECK(twice.provenance()[1].status_before == RuleStatus::Predicted);
    CHECK(twice.provenance()[1].status_after == RuleStatus::Characterised);
    CHECK(twice.provenance()[1].occurrences == kPromotionThreshold);
    CHECK(twice.provenance()[0].seq < twice.provenance()[1].seq);
    CHECK(db.find_rule("r1")->occurrences == 0);
    CHECK_THROWS_AS(promote(db, "nope"), RulesError);
}

TEST_CASE("predicted rule gives q_uout then q_out after persistence") {
    auto prog = testing::fixture_program("predicted.chem");
    auto first = cstm::run(prog, testing::fixture_rules("predicted.rules"));
    CHECK(first.trace.halt.kind == HaltKind::UOut);
    auto second = cstm::run(prog, load_rules(save_rules(first.db)));
    CHECK(second.trace.halt.kind == HaltKind::Out);
    auto third = cstm::run(prog, second.db);
    CHECK(third.trace.halt.kind == HaltKind::Out);
}

TEST_CASE("exploration finds a latent rule as novel") {
    auto latent = testing::fixture_rules("tiny.latent.rules");
    Rng rng(11);
    auto found = explore(latent, {{"A", 0.1}, {"C", 0.1}}, {80, 3600}, rng);
    REQUIRE(found);
    CHECK(found->rule.id == "r_hidden");
    CHECK(found->rule.status == RuleStatus::Novel);
    CHECK(found->rule.window.contains(found->point));
    Rng rng2(11);
    CHECK_FALSE(explore(latent, {{"B", 0.1}}, {80, 3600}, rng2));

    auto prog = testing::fixture_program("norule.chem");
    auto db = testing::fixture_rules("tiny.rules");
    auto blind = cstm::run(prog, db);
    CHECK(blind.trace.halt.kind == HaltKind::Fail);
    auto seen = cstm::run(prog, db, cstm::kDefaultBudget, {.explore = true, .latent = &latent, .seed = 1});
    CHECK(seen.trace.halt.kind == HaltKind::NOut);
    REQUIRE(seen.db.find_rule("r_hidden"));
    CHECK(seen.db.find_species("Y"));
    CHECK(cstm::run(prog, seen.db).trace.halt.kind == HaltKind::Out);
}

TEST_CASE("planner finds the shortest pathway") {
    auto db = testing::fixture_rules("tiny.rules");
    auto p = plan_pathway(db, "T", {"A", "B", "C"});
    REQUIRE(p.steps.size() == 2);
    CHECK(p.steps[0].rule_id == "r1");
    CHECK(p.steps[1].rule_id == "r2");
    CHECK(p.expected_perfect_fraction == doctest::Approx(0.98 * 0.98));
    CHECK(perfect_copy_fraction(p) == p.expected_perfect_fraction);

    CHECK(plan_pathway(db, "T", {"X", "C"}).steps.size() == 1);
    CHECK(plan_pathway(db, "T", {"T"}).steps.empty());

    auto kind = [&](const std::string& target, std::set<std::string> stock, int depth) {
        try {
            plan_pathway(db, target, stock, depth);
        } catch (const PlanError& e) {
            return e.kind();
        }
        FAIL("plan unexpectedly succeeded");
        return PlanErrorKind::UnknownTarget;
    };
    CHECK(kind("T", {"A", "B"}, kDefaultPlanDepth) == PlanErrorKind::Unreachable);
    CHECK(kind("T", {"A", "B", "C"}, 1) == PlanErrorKind::Unreachable);
    CHECK(kind("Q", {"A"}, kDefaultPlanDepth) == PlanErrorKind::UnknownTarget);

    auto sp = db.species();
    std::vector<Species> list;
    for (auto [id, s] : sp) {
        if (id == "T") s.stable = false;
        list.push_back(s);
    }
    std::vector<TransitionRule> rl;
    for (const auto& [id, r] : db.rules()) rl.push_back(r);
    auto unstable = RuleDatabase::create(list, rl);
    try {
        plan_pathway(unstable, "T", {"A", "B", "C"});
        FAIL("unstable target planned");
    } catch (const PlanError& e) {
        CHECK(e.kind() == PlanErrorKind::UnstableTarget);
    }
}

TEST_CASE("species validation enforces assembly bounds") {
    CHECK_THROWS_AS(testing::fixture_rules("bad_assembly.rules"), RulesError);
    Species s = species("M", 120, {{"C", 8}});
    s.bonds = 8;
    s.assembly_index = 3;
    CHECK(check_species(s).empty());
    s.assembly_index = 7;
    CHECK(check_species(s).empty());
    s.assembly_index = 2;
    CHECK_FALSE(check_species(s).empty());
    s.assembly_index = 8;
    CHECK_FALSE(check_species(s).empty());
    s.molar_mass = 0;
    s.assembly_index = 4;
    CHECK_FALSE(check_species(s).empty());
}
