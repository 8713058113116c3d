#include "chemputer/program.hpp"

#include <algorithm>

namespace chemputer {

namespace {

struct OpNames {
    UnitOpKind kind;
    std::string_view name;
    std::string_view keyword;
};

constexpr std::array<OpNames, 14> kOpNames = {{
    {UnitOpKind::Add, "Add", "add"},
    {UnitOpKind::Transfer, "Transfer", "transfer"},
    {UnitOpKind::HeatStir, "HeatStir", "heat_stir"},
    {UnitOpKind::Chill, "Chill", "chill"},
    {UnitOpKind::Separate, "Separate", "separate"},
    {UnitOpKind::Dry, "Dry", "dry"},
    {UnitOpKind::Crystallise, "Crystallise", "crystallise"},
    {UnitOpKind::Distil, "Distil", "distil"},
    {UnitOpKind::Sublime, "Sublime", "sublime"},
    {UnitOpKind::Filter, "Filter", "filter"},
    {UnitOpKind::Evaporate, "Evaporate", "evaporate"},
    {UnitOpKind::Clean, "Clean", "clean"},
    {UnitOpKind::ReactHot, "ReactHot", "react_hot"},
    {UnitOpKind::ReactCold, "ReactCold", "react_cold"},
}};

const OpNames& names_of(UnitOpKind kind) {
    return *std::find_if(kOpNames.begin(), kOpNames.end(), [&](const OpNames& n) { return n.kind == kind; });
}

}  // namespace

std::string_view to_string(UnitOpKind kind) { return names_of(kind).name; }
std::string_view keyword(UnitOpKind kind) { return names_of(kind).keyword; }

std::optional<UnitOpKind> unit_op_from_keyword(std::string_view word) {
    for (const auto& n : kOpNames) {
        if (n.keyword == word) return n.kind;
    }
    return std::nullopt;
}

std::optional<UnitOpKind> unit_op_from_name(std::string_view name) {
    for (const auto& n : kOpNames) {
        if (n.name == name) return n.kind;
    }
    return std::nullopt;
}

bool is_movement_op(UnitOpKind kind) {
    return kind == UnitOpKind::Add || kind == UnitOpKind::Transfer || kind == UnitOpKind::Clean;
}

bool is_reaction_op(UnitOpKind kind) {
    return kind == UnitOpKind::ReactHot || kind == UnitOpKind::ReactCold;
}

std::string_view to_string(Unit unit) {
    switch (unit) {
        case Unit::Mol: return "mol";
        case Unit::Gram: return "g";
        case Unit::Millilitre: return "mL";
        case Unit::Celsius: return "C";
        case Unit::Second: return "s";
    }
    return "?";
}

std::string_view to_string(ReagentRole role) {
    switch (role) {
        case ReagentRole::Reagent: return "reagent";
        case ReagentRole::Catalyst: return "catalyst";
        case ReagentRole::Solvent: return "solvent";
    }
    return "?";
}

std::optional<std::string> UnitOperation::symbol(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    if (const auto* s = std::get_if<Symbol>(&it->second)) return s->text;
    return std::nullopt;
}

std::optional<Quantity> UnitOperation::quantity(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    if (const auto* q = std::get_if<Quantity>(&it->second)) return *q;
    return std::nullopt;
}

std::optional<double> UnitOperation::number(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    return std::nullopt;
}

const ReagentDecl* ChemProgram::find_reagent(const std::string& id) const {
    for (const auto& r : reagents) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

const HardwareReq* ChemProgram::find_hardware(const std::string& vessel) const {
    for (const auto& h : hardware_reqs) {
        if (h.vessel == vessel) return &h;
    }
    return nullptr;
}

bool ChemProgram::is_source_vessel(const std::string& vessel) const {
    return std::any_of(reagents.begin(), reagents.end(),
                       [&](const ReagentDecl& r) { return r.source_vessel == vessel; });
}

bool is_vessel_param(std::string_view key) { return key == "vessel" || key == "from" || key == "to"; }

std::string host_vessel(const UnitOperation& op) {
    if (op.kind == UnitOpKind::Transfer) return op.symbol("from").value_or("");
    return op.symbol("vessel").value_or("");
}

}  // namespace chemputer
