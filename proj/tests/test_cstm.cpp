#include <doctest.h>

#include <sstream>

#include "chemputer/chemlang.hpp"
#include "chemputer/cstm.hpp"
#include "fixtures.hpp"

using namespace chemputer;
using cstm::RecordKind;
using rules::HaltKind;

TEST_CASE("single transformation reaches q_out with the declared yield") {
    auto db = testing::fixture_rules("tiny.rules");
    auto res = cstm::run(testing::fixture_program("tiny_hot.chem"), db);
    const auto& fs = res.trace.final_state;
    CHECK(res.trace.halt.kind == HaltKind::Out);
    CHECK(fs.reactions == 1);
    // A + B -> X at yield 0.9 from 0.1 mol each
    CHECK(amount_of(fs.product(), "X") == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(amount_of(fs.waste(), "A") == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(amount_of(fs.waste(), "B") == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(cstm::mass_ledger(res.trace).residual <= 1e-12);
}

TEST_CASE("two chained transformations") {
    auto db = testing::fixture_rules("tiny.rules");
    auto res = cstm::run(testing::fixture_program("tiny_two_step.chem"), db);
    CHECK(res.trace.halt.kind == HaltKind::Out);
    CHECK(res.trace.final_state.reactions == 2);
    // r2 outranks r1 once X and C are both present: 0.09 X * 0.9
    CHECK(amount_of(res.trace.final_state.product(), "T") == doctest::Approx(0.081).epsilon(1e-12));
    auto ledger = cstm::mass_ledger(res.trace);
    CHECK(ledger.residual <= 1e-12);
    CHECK(amount_of(ledger.total_consumed, "X") == doctest::Approx(0.081).epsilon(1e-12));
}

TEST_CASE("no matching rule halts in q_fail") {
    auto res = cstm::run(testing::fixture_program("norule.chem"), testing::fixture_rules("tiny.rules"));
    CHECK(res.trace.halt.kind == HaltKind::Fail);
    CHECK(res.trace.halt.reason.rfind("no_matching_rule", 0) == 0);
    CHECK(cstm::mass_ledger(res.trace).residual <= 1e-12);
}

TEST_CASE("budget exhaustion halts in q_fail") {
    auto db = testing::fixture_rules("tiny.rules");
    auto prog = testing::fixture_program("tiny_hot.chem");
    for (std::uint64_t budget : {1u, 3u, 7u, 21u}) {
        CAPTURE(budget);
        auto res = cstm::run(prog, db, budget);
        CHECK(res.trace.halt.kind == HaltKind::Fail);
        CHECK(res.trace.halt.reason == "budget_exhausted");
        CHECK(res.trace.final_state.step_count == budget);
        CHECK(cstm::mass_ledger(res.trace).residual <= 1e-12);
    }
    CHECK(cstm::run(prog, db, 22).trace.halt.kind == HaltKind::Out);
}

TEST_CASE("trace is gap free and ends at the halt") {
    auto res = cstm::run(testing::fixture_program("atropine_3step.chem"), testing::fixture_rules("corpus.rules"));
    REQUIRE(!res.trace.records.empty());
    for (std::size_t i = 0; i < res.trace.records.size(); ++i) CHECK(res.trace.records[i].step == i + 1);
    CHECK(res.trace.records.back().step == res.trace.final_state.step_count);
    CHECK(res.trace.halt.kind == HaltKind::Out);
    CHECK(res.trace.final_state.reactions == 3);

    int moves = 0;
    for (const auto& r : res.trace.records) {
        if (r.kind == RecordKind::Move) {
            ++moves;
            CHECK(r.move != cstm::Move::N);
            CHECK(std::abs(r.after.index - r.before.index) == 1);
        }
    }
    CHECK(moves > 0);
}

TEST_CASE("trace serialisation is deterministic") {
    auto db = testing::fixture_rules("tiny.rules");
    auto prog = testing::fixture_program("tiny_two_step.chem");
    auto a = cstm::run(prog, db, cstm::kDefaultBudget, {.seed = 3});
    auto b = cstm::run(prog, db, cstm::kDefaultBudget, {.seed = 3});
    CHECK(a.trace.id == b.trace.id);
    auto text = cstm::trace_to_jsonl(a.trace);
    CHECK(text == cstm::trace_to_jsonl(b.trace));
    std::istringstream in(text);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == a.trace.records.size() + 1);
    CHECK(cstm::run(prog, db, cstm::kDefaultBudget, {.seed = 4}).trace.id != a.trace.id);
}

TEST_CASE("machine layout and primitive errors") {
    auto db = testing::fixture_rules("tiny.rules");
    auto state = cstm::init_machine(testing::fixture_program("tiny_hot.chem"), 100, &db);
    CHECK(state.tape.at(0).name == kWasteVessel);
    CHECK(state.tape.at(1).name == kProductVessel);
    CHECK(state.tape.at(2).name == "R1");
    CHECK(amount_of(state.ledger.in, "A") == 0.1);
    CHECK(state.cell("RX1") == nullptr);

    Primitive greedy;
    greedy.kind = PrimitiveKind::SM;
    greedy.vessel = "R1";
    greedy.counterpart = Endpoint::line();
    greedy.amount = Quantity{0.5, Unit::Mol};
    state.head = state.cell_index.at("R1");
    CHECK_THROWS_AS(cstm::apply_primitive(state, greedy, &db), cstm::InsufficientMaterial);

    Primitive unnamed;
    unnamed.kind = PrimitiveKind::AM;
    unnamed.vessel = "R1";
    unnamed.counterpart = Endpoint::reagent("zz");
    CHECK_THROWS_AS(cstm::apply_primitive(state, unnamed, &db), cstm::UnknownDestination);

    // vessels outside the layout are created on first use
    Primitive spill = greedy;
    spill.amount = Quantity{0.05, Unit::Mol};
    spill.counterpart = Endpoint::vessel("S9");
    auto moved = cstm::apply_primitive(state, spill, &db);
    CHECK(amount_of(moved, "A") == doctest::Approx(0.05));
    REQUIRE(state.cell("S9") != nullptr);
    CHECK(amount_of(state.cell("S9")->contents, "A") == doctest::Approx(0.05));
}

TEST_CASE("offloaded cells can be reinstantiated") {
    auto db = testing::fixture_rules("tiny.rules");
    auto res = cstm::run(testing::fixture_program("tiny_hot.chem"), db);
    auto state = res.trace.final_state;
    cstm::instantiate_cell(state, "RX1");
    CHECK(state.cell("RX1")->state == cstm::CellState::Empty);
    CHECK(state.cell("RX1")->energy_input == 0.0);
    CHECK_THROWS_AS(cstm::instantiate_cell(state, kProductVessel), cstm::CellStillFilled);
    CHECK_THROWS_AS(cstm::instantiate_cell(state, "nowhere"), cstm::UnknownDestination);
}

TEST_CASE("unit conversion uses molar mass and unit density") {
    auto db = testing::fixture_rules("tiny.rules");
    CHECK(cstm::to_mol({14.0, Unit::Gram}, "A", &db) == doctest::Approx(1.0));
    CHECK(cstm::to_mol({32.0, Unit::Millilitre}, "B", &db) == doctest::Approx(2.0));
    CHECK(cstm::to_mol({50.0, Unit::Gram}, "unlisted", &db) == doctest::Approx(50.0 / cstm::kDefaultMolarMass));
    CHECK(cstm::volume_ml({{"A", 1.0}, {"X", 0.5}}, &db) == doctest::Approx(14.0 + 15.0));
}

TEST_CASE("worst outcome over a run decides the halt") {
    // predicted rule first, characterised rule second: q_uout dominates q_out
    auto db = testing::fixture_rules("tiny.rules");
    auto r1 = *db.find_rule("r1");
    r1.status = rules::RuleStatus::Predicted;
    r1.occurrences = 0;
    db = db.with_updated_rule(r1, std::nullopt);
    auto res = cstm::run(testing::fixture_program("tiny_two_step.chem"), db);
    CHECK(res.trace.halt.kind == HaltKind::UOut);
    CHECK(res.db.find_rule("r1")->occurrences == 1);
}
