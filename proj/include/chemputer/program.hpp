#pragma once
// In-memory form of a chemical program: declared reagents, hardware
// requirements and an ordered list of unit operations.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chemputer/common.hpp"

namespace chemputer {

enum class UnitOpKind {
    Add,
    Transfer,
    HeatStir,
    Chill,
    Separate,
    Dry,
    Crystallise,
    Distil,
    Sublime,
    Filter,
    Evaporate,
    Clean,
    ReactHot,
    ReactCold,
};

inline constexpr std::array<UnitOpKind, 14> kAllUnitOpKinds = {
    UnitOpKind::Add,       UnitOpKind::Transfer, UnitOpKind::HeatStir, UnitOpKind::Chill,
    UnitOpKind::Separate,  UnitOpKind::Dry,      UnitOpKind::Crystallise, UnitOpKind::Distil,
    UnitOpKind::Sublime,   UnitOpKind::Filter,   UnitOpKind::Evaporate, UnitOpKind::Clean,
    UnitOpKind::ReactHot,  UnitOpKind::ReactCold,
};

/// Enum name, e.g. "HeatStir".
std::string_view to_string(UnitOpKind kind);
/// Keyword used in program text, e.g. "heat_stir".
std::string_view keyword(UnitOpKind kind);
std::optional<UnitOpKind> unit_op_from_keyword(std::string_view word);
std::optional<UnitOpKind> unit_op_from_name(std::string_view name);

/// Ops that only move material and can run in any material-holding vessel.
bool is_movement_op(UnitOpKind kind);
/// Ops that trigger a transformation attempt at the vessel once conditioned.
bool is_reaction_op(UnitOpKind kind);

// Base units after normalization: mol, g, mL, C, s.
enum class Unit { Mol, Gram, Millilitre, Celsius, Second };

std::string_view to_string(Unit unit);

struct Quantity {
    double value = 0.0;
    Unit unit = Unit::Mol;
    bool operator==(const Quantity&) const = default;
};

/// Bare identifier or species id (`sp:water`).
struct Symbol {
    std::string text;
    bool operator==(const Symbol&) const = default;
};

struct Text {
    std::string text;
    bool operator==(const Text&) const = default;
};

using ParamValue = std::variant<Symbol, double, Quantity, Text>;

struct UnitOperation {
    UnitOpKind kind = UnitOpKind::Add;
    std::map<std::string, ParamValue> params;
    std::map<std::string, std::string> metadata;

    bool has(const std::string& key) const { return params.count(key) != 0; }
    /// Symbol-valued parameter, if present.
    std::optional<std::string> symbol(const std::string& key) const;
    std::optional<Quantity> quantity(const std::string& key) const;
    std::optional<double> number(const std::string& key) const;

    bool operator==(const UnitOperation&) const = default;
};

enum class ReagentRole { Reagent, Catalyst, Solvent };

std::string_view to_string(ReagentRole role);

struct ReagentDecl {
    std::string id;
    std::string species;
    Quantity amount;  // Mol or Gram
    std::string source_vessel;
    ReagentRole role = ReagentRole::Reagent;

    bool consumed() const { return role != ReagentRole::Catalyst; }
    bool operator==(const ReagentDecl&) const = default;
};

struct HardwareReq {
    std::string vessel;
    std::string kind;  // hardware node kind name, e.g. "Reactor"
    bool operator==(const HardwareReq&) const = default;
};

inline const std::string kWasteVessel = "waste";
inline const std::string kProductVessel = "product";

struct ChemProgram {
    std::string name;
    std::vector<ReagentDecl> reagents;
    std::vector<HardwareReq> hardware_reqs;
    std::vector<UnitOperation> steps;
    std::map<std::string, std::string> metadata;

    const ReagentDecl* find_reagent(const std::string& id) const;
    const HardwareReq* find_hardware(const std::string& vessel) const;
    bool is_source_vessel(const std::string& vessel) const;

    bool operator==(const ChemProgram&) const = default;
};

/// Vessel-valued parameter keys (`vessel`, `from`, `to`).
bool is_vessel_param(std::string_view key);

/// The vessel an op runs in (the `from` vessel for Transfer).
std::string host_vessel(const UnitOperation& op);

}  // namespace chemputer
