#pragma once
// The four machine primitives and the macro expansion of unit operations
// into primitive sequences.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chemputer/program.hpp"

namespace chemputer {

enum class PrimitiveKind { AM, SM, AE, SE };

std::string_view to_string(PrimitiveKind kind);

/// Where matter comes from (AM) or goes to (SM).
struct Endpoint {
    enum class Kind {
        None,
        Vessel,     // a named tape cell
        Reagent,    // a declared reagent, resolved to its source vessel
        Line,       // material carried by the head between cells
        Reservoir,  // external supply outside the tape (cleaning solvent, redoses)
    };
    Kind kind = Kind::None;
    std::string name;

    static Endpoint vessel(std::string n) { return {Kind::Vessel, std::move(n)}; }
    static Endpoint reagent(std::string n) { return {Kind::Reagent, std::move(n)}; }
    static Endpoint line() { return {Kind::Line, "line"}; }
    static Endpoint reservoir(std::string species) { return {Kind::Reservoir, std::move(species)}; }

    bool operator==(const Endpoint&) const = default;
};

/// Which part of a cell's contents an AM/SM moves.
struct Selector {
    enum class Kind { All, Species, Solvents };
    Kind kind = Kind::All;
    std::string species;

    static Selector all() { return {}; }
    static Selector of(std::string s) { return {Kind::Species, std::move(s)}; }
    static Selector solvents() { return {Kind::Solvents, {}}; }

    bool operator==(const Selector&) const = default;
};

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::AM;
    std::string vessel;      // cell the head operates on
    Endpoint counterpart;    // AM: source, SM: destination
    Selector select;
    std::optional<Quantity> amount;  // absent: everything selected
    std::optional<double> fraction;  // of the selection, in (0, 1]
    std::optional<double> setpoint;  // AE/SE target temperature, C
    double duration = 0.0;           // s
    /// Energy primitive that conditions the cell for a transformation.
    bool reactive = false;

    bool operator==(const Primitive&) const = default;
};

/// Primitive kinds for a unit operation (golden mapping).
std::vector<PrimitiveKind> primitive_sequence(UnitOpKind kind);

/// Full expansion with concrete endpoints and parameters.
std::vector<Primitive> expand_unit_op(const UnitOperation& op);

}  // namespace chemputer
