#include <doctest.h>

#include <string>

#include "chemputer/chemlang.hpp"
#include "chemputer/primitives.hpp"
#include "fixtures.hpp"

using namespace chemputer;
using chemlang::ParseError;
using chemlang::ParseErrorKind;
using chemlang::StepCategory;

namespace {

const char* kMinimal = R"(procedure "mini" {
  reagents {
    a: A 0.5 mol @R1 reagent
    s: sp:water 20 g @R2 solvent
  }
  hardware {
    RX1: Reactor
  }
  steps {
    add(vessel=RX1, reagent=a, amount=100 mmol)
    heat_stir(vessel=RX1, temp=80 C, time=2 min)
  }
}
)";

ParseErrorKind kind_of(const std::string& text) {
    try {
        chemlang::parse_program(text);
    } catch (const ParseError& e) {
        return e.kind();
    }
    FAIL("expected a parse error");
    return ParseErrorKind::Syntax;
}

}  // namespace

TEST_CASE("units normalise to base units") {
    auto prog = chemlang::parse_program(kMinimal);
    REQUIRE(prog.steps.size() == 2);
    auto amount = prog.steps[0].quantity("amount");
    REQUIRE(amount);
    CHECK(amount->unit == Unit::Mol);
    CHECK(amount->value == doctest::Approx(0.1));
    auto time = prog.steps[1].quantity("time");
    REQUIRE(time);
    CHECK(time->unit == Unit::Second);
    CHECK(time->value == 120.0);
    CHECK(prog.reagents[1].species == "sp:water");
    CHECK(prog.reagents[1].amount.unit == Unit::Gram);
    CHECK(prog.reagents[1].role == ReagentRole::Solvent);
}

TEST_CASE("format then parse is the identity on every fixture") {
    for (const char* name : {"atropine_3step.chem", "indole_1step.chem", "alkynol_1step.chem", "tiny_hot.chem",
                             "tiny_two_step.chem", "norule.chem", "predicted.chem"}) {
        CAPTURE(name);
        auto prog = testing::fixture_program(name);
        auto text = chemlang::format_program(prog);
        CHECK(chemlang::parse_program(text) == prog);
        CHECK(chemlang::format_program(chemlang::parse_program(text)) == text);
    }
}

TEST_CASE("parse errors carry kind and position") {
    SUBCASE("unknown step keyword") {
        std::string text = kMinimal;
        text.replace(text.find("heat_stir"), 9, "levitate");
        try {
            chemlang::parse_program(text);
            FAIL("accepted unknown op");
        } catch (const ParseError& e) {
            CHECK(e.kind() == ParseErrorKind::UnknownStepKind);
            CHECK(e.line() == 11);
            CHECK(e.column() == 5);
        }
    }
    SUBCASE("duplicate reagent id") {
        std::string text = kMinimal;
        text.replace(text.find("s: sp:water"), 1, "a");
        CHECK(kind_of(text) == ParseErrorKind::DuplicateReagent);
    }
    SUBCASE("reference to an undeclared reagent") {
        std::string text = kMinimal;
        text.replace(text.find("reagent=a"), 9, "reagent=z");
        CHECK(kind_of(text) == ParseErrorKind::UndeclaredReference);
    }
    SUBCASE("wrong unit for a parameter") {
        std::string text = kMinimal;
        text.replace(text.find("80 C"), 4, "80 s");
        CHECK(kind_of(text) == ParseErrorKind::InvalidParameter);
    }
    SUBCASE("missing required parameter") {
        std::string text = kMinimal;
        text.replace(text.find(", time=2 min"), 12, "");
        CHECK(kind_of(text) == ParseErrorKind::InvalidParameter);
    }
    SUBCASE("unbalanced braces") {
        std::string text = kMinimal;
        text.pop_back();
        text.pop_back();
        CHECK(kind_of(text) == ParseErrorKind::Syntax);
    }
}

TEST_CASE("every unit operation expands to its primitive sequence") {
    using P = PrimitiveKind;
    CHECK(primitive_sequence(UnitOpKind::Separate) == std::vector<P>{P::AM, P::AE, P::SM});
    CHECK(primitive_sequence(UnitOpKind::Dry) == std::vector<P>{P::AE, P::SM});
    CHECK(primitive_sequence(UnitOpKind::Crystallise) == std::vector<P>{P::AE, P::SE, P::SM});
    CHECK(primitive_sequence(UnitOpKind::Distil) == std::vector<P>{P::AE, P::SM, P::SE, P::AM});
    CHECK(primitive_sequence(UnitOpKind::ReactHot) == std::vector<P>{P::AM, P::AE});
    CHECK(primitive_sequence(UnitOpKind::ReactCold) == std::vector<P>{P::AM, P::SE});
    CHECK(primitive_sequence(UnitOpKind::Sublime) == std::vector<P>{P::SM, P::AE, P::SE, P::AM});

    for (auto kind : kAllUnitOpKinds) {
        CAPTURE(to_string(kind));
        UnitOperation op;
        op.kind = kind;
        op.params["vessel"] = Symbol{"V"};
        op.params["from"] = Symbol{"V"};
        op.params["to"] = Symbol{"W"};
        auto prims = expand_unit_op(op);
        REQUIRE(prims.size() == primitive_sequence(kind).size());
        for (std::size_t i = 0; i < prims.size(); ++i) CHECK(prims[i].kind == primitive_sequence(kind)[i]);
    }
}

TEST_CASE("reactive energy primitive conditions the vessel") {
    auto prog = testing::fixture_program("tiny_hot.chem");
    auto prims = expand_unit_op(prog.steps[1]);
    REQUIRE(prims.size() == 2);
    CHECK(prims[0].counterpart == Endpoint::reagent("b"));
    CHECK(prims[1].reactive);
    CHECK(prims[1].setpoint == 80.0);
    CHECK(prims[1].duration == 3600.0);
}

TEST_CASE("step classification of the corpus") {
    auto atr = chemlang::classify_steps(testing::fixture_program("atropine_3step.chem"));
    CHECK(atr.cumulative == std::vector<int>{20, 34, 47});
    REQUIRE(atr.per_reaction_step.size() == 3);
    CHECK(atr.per_reaction_step[0].ops == 20);
    CHECK(atr.per_reaction_step[1].ops == 14);
    CHECK(atr.per_reaction_step[2].ops == 13);
    CHECK(chemlang::classify_steps(testing::fixture_program("indole_1step.chem")).total() == 18);
    CHECK(chemlang::classify_steps(testing::fixture_program("alkynol_1step.chem")).total() == 13);

    for (const auto& row : atr.per_reaction_step) {
        int primary = 0;
        for (auto c : {StepCategory::AddMatter, StepCategory::SubtractMatter, StepCategory::AddEnergy,
                       StepCategory::SubtractEnergy}) {
            primary += row.counts[c];
        }
        CHECK(primary == row.ops);
        CHECK(row.counts[StepCategory::Composite] <= row.ops);
    }
}

TEST_CASE("category of an op follows its first primitive") {
    CHECK(chemlang::primary_category(UnitOpKind::Add) == StepCategory::AddMatter);
    CHECK(chemlang::primary_category(UnitOpKind::Transfer) == StepCategory::SubtractMatter);
    CHECK(chemlang::primary_category(UnitOpKind::Chill) == StepCategory::SubtractEnergy);
    CHECK(chemlang::primary_category(UnitOpKind::Distil) == StepCategory::AddEnergy);
    CHECK(chemlang::is_composite(UnitOpKind::Separate));
    CHECK_FALSE(chemlang::is_composite(UnitOpKind::ReactHot));
}

TEST_CASE("synthetic corpus scales linearly") {
    for (int t : {3, 8, 15}) {
        std::vector<double> x, y;
        for (int k = 1; k <= 6; ++k) {
            auto hist = chemlang::classify_steps(chemlang::synthetic_program(k, t));
            CHECK(hist.total() == k * t);
            x.push_back(k);
            y.push_back(hist.total());
        }
        auto fit = chemlang::linear_fit(x, y);
        REQUIRE(fit.defined);
        CHECK(fit.slope == doctest::Approx(t).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("linear fit against hand-computed least squares") {
    // y = 2x + 1 with residuals (+1, -1, -1, +1): slope 2, intercept 1, R^2 = 1 - 4/24
    auto fit = chemlang::linear_fit({0, 1, 2, 3}, {2, 2, 4, 8});
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
    CHECK(fit.r_squared == doctest::Approx(1.0 - 4.0 / 24.0));
    CHECK_FALSE(chemlang::linear_fit({1, 1}, {2, 3}).defined);
}
