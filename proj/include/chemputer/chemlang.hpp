#pragma once
// Text front end for chemical programs: parsing, canonical formatting and
// step statistics.
//
// Grammar (LL(1), line comments start with '#'):
//
//   program   := 'procedure' STRING '{' section* '}'
//   section   := 'metadata' '{' (IDENT '=' value)* '}'
//              | 'reagents' '{' (IDENT ':' species NUMBER UNIT '@' IDENT role)* '}'
//              | 'hardware' '{' (IDENT ':' IDENT)* '}'
//              | 'steps' '{' step* '}'
//   step      := KEYWORD '(' [param (',' param)*] ')' ['[' [meta (',' meta)*] ']']
//   param     := IDENT '=' (species | NUMBER [UNIT] | STRING)
//   species   := IDENT [':' IDENT]
//
// Units: mol mmol g mg mL C s min h, normalized to mol g mL C s.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "chemputer/program.hpp"

namespace chemputer::chemlang {

enum class ParseErrorKind {
    Syntax,
    UnknownStepKind,
    DuplicateReagent,
    UndeclaredReference,
    InvalidParameter,
};

std::string_view to_string(ParseErrorKind kind);

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, std::size_t line, std::size_t column, const std::string& message);

    ParseErrorKind kind() const { return kind_; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
    std::size_t column_;
};

ChemProgram parse_program(std::string_view source);
std::string format_program(const ChemProgram& program);

/// Re-checks the structural invariants of an in-memory program (the same
/// checks parse_program applies). Throws ParseError with line/column 0.
void check_program(const ChemProgram& program);

enum class StepCategory { AddMatter, SubtractMatter, AddEnergy, SubtractEnergy, Composite };

inline constexpr std::array<StepCategory, 5> kAllCategories = {
    StepCategory::AddMatter, StepCategory::SubtractMatter, StepCategory::AddEnergy,
    StepCategory::SubtractEnergy, StepCategory::Composite};

std::string_view to_string(StepCategory c);

/// Category of the op's first primitive.
StepCategory primary_category(UnitOpKind kind);
/// Expansions longer than two primitives also count as Composite.
bool is_composite(UnitOpKind kind);

struct CategoryCounts {
    std::array<int, 5> counts{};
    int& operator[](StepCategory c) { return counts[static_cast<std::size_t>(c)]; }
    int operator[](StepCategory c) const { return counts[static_cast<std::size_t>(c)]; }
    bool operator==(const CategoryCounts&) const = default;
};

struct StepHistogram {
    struct Row {
        int reaction_step = 0;
        CategoryCounts counts;
        int ops = 0;
    };
    std::vector<Row> per_reaction_step;
    std::vector<int> cumulative;

    int total() const { return cumulative.empty() ? 0 : cumulative.back(); }
};

/// Steps carry their reaction step in metadata key `reaction_step`; a step
/// without the key belongs to the most recent reaction step (1 at the start).
StepHistogram classify_steps(const ChemProgram& program);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
    bool defined = false;  // false with fewer than two distinct x values
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Program with `reaction_steps` reaction steps, each built from the same
/// fixed template of `ops_per_step` unit operations.
ChemProgram synthetic_program(int reaction_steps, int ops_per_step);

}  // namespace chemputer::chemlang
