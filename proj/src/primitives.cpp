#include "chemputer/primitives.hpp"

namespace chemputer {

std::string_view to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::AM: return "AM";
        case PrimitiveKind::SM: return "SM";
        case PrimitiveKind::AE: return "AE";
        case PrimitiveKind::SE: return "SE";
    }
    return "?";
}

std::vector<PrimitiveKind> primitive_sequence(UnitOpKind kind) {
    using P = PrimitiveKind;
    switch (kind) {
        case UnitOpKind::Add: return {P::AM};
        case UnitOpKind::Transfer: return {P::SM, P::AM};
        case UnitOpKind::HeatStir: return {P::AE};
        case UnitOpKind::Chill: return {P::SE};
        case UnitOpKind::Separate: return {P::AM, P::AE, P::SM};
        case UnitOpKind::Dry: return {P::AE, P::SM};
        case UnitOpKind::Crystallise: return {P::AE, P::SE, P::SM};
        case UnitOpKind::Distil: return {P::AE, P::SM, P::SE, P::AM};
        case UnitOpKind::Sublime: return {P::SM, P::AE, P::SE, P::AM};
        case UnitOpKind::Filter: return {P::SM};
        case UnitOpKind::Evaporate: return {P::AE, P::SM};
        case UnitOpKind::Clean: return {P::AM, P::SM};
        case UnitOpKind::ReactHot: return {P::AM, P::AE};
        case UnitOpKind::ReactCold: return {P::AM, P::SE};
    }
    return {};
}

namespace {

constexpr double kDefaultProcessTime = 60.0;  // s, when an op omits `time`

Primitive make(PrimitiveKind kind, std::string vessel) {
    Primitive p;
    p.kind = kind;
    p.vessel = std::move(vessel);
    return p;
}

Primitive energy(PrimitiveKind kind, const std::string& vessel, std::optional<double> setpoint, double duration) {
    Primitive p = make(kind, vessel);
    p.setpoint = setpoint;
    p.duration = duration;
    return p;
}

double param_value(const UnitOperation& op, const std::string& key, double fallback) {
    if (auto q = op.quantity(key)) return q->value;
    return fallback;
}

Selector species_selector(const UnitOperation& op, const std::string& key, Selector fallback) {
    if (auto s = op.symbol(key)) return Selector::of(*s);
    return fallback;
}

}  // namespace

std::vector<Primitive> expand_unit_op(const UnitOperation& op) {
    using P = PrimitiveKind;
    const std::string vessel = op.symbol("vessel").value_or("");
    const std::optional<double> temp =
        op.quantity("temp") ? std::optional<double>(op.quantity("temp")->value) : std::nullopt;
    const double time = param_value(op, "time", kDefaultProcessTime);
    std::vector<Primitive> out;

    switch (op.kind) {
        case UnitOpKind::Add: {
            Primitive am = make(P::AM, vessel);
            am.counterpart = Endpoint::reagent(op.symbol("reagent").value_or(""));
            am.amount = op.quantity("amount");
            out.push_back(am);
            break;
        }
        case UnitOpKind::Transfer: {
            Primitive sm = make(P::SM, op.symbol("from").value_or(""));
            sm.counterpart = Endpoint::line();
            sm.select = species_selector(op, "species", Selector::all());
            sm.amount = op.quantity("amount");
            sm.fraction = op.number("fraction");
            if (!sm.amount) sm.amount = op.quantity("volume");
            Primitive am = make(P::AM, op.symbol("to").value_or(""));
            am.counterpart = Endpoint::line();
            out.push_back(sm);
            out.push_back(am);
            break;
        }
        case UnitOpKind::HeatStir:
            out.push_back(energy(P::AE, vessel, temp, time));
            break;
        case UnitOpKind::Chill:
            out.push_back(energy(P::SE, vessel, temp, time));
            break;
        case UnitOpKind::ReactHot:
        case UnitOpKind::ReactCold: {
            Primitive am = make(P::AM, vessel);
            if (auto r = op.symbol("reagent")) {
                am.counterpart = Endpoint::reagent(*r);
            } else {
                am.counterpart = Endpoint::vessel(op.symbol("from").value_or(""));
                am.select = species_selector(op, "species", Selector::all());
                am.fraction = op.number("fraction");
            }
            am.amount = op.quantity("amount");
            Primitive e = energy(op.kind == UnitOpKind::ReactHot ? P::AE : P::SE, vessel, temp, time);
            e.reactive = true;
            out.push_back(am);
            out.push_back(e);
            break;
        }
        case UnitOpKind::Separate: {
            Primitive am = make(P::AM, vessel);
            am.counterpart = Endpoint::reagent(op.symbol("solvent").value_or(""));
            am.amount = op.quantity("amount");
            Primitive mix = energy(P::AE, vessel, std::nullopt, param_value(op, "time", 300.0));
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::vessel(op.symbol("to").value_or(""));
            sm.select = species_selector(op, "species", Selector::all());
            out.push_back(am);
            out.push_back(mix);
            out.push_back(sm);
            break;
        }
        case UnitOpKind::Dry:
        case UnitOpKind::Evaporate: {
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::vessel(op.symbol("to").value_or(kWasteVessel));
            sm.select = species_selector(op, "remove", Selector::solvents());
            out.push_back(energy(P::AE, vessel, temp, time));
            out.push_back(sm);
            break;
        }
        case UnitOpKind::Crystallise: {
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::vessel(op.symbol("to").value_or(""));
            sm.select = species_selector(op, "species", Selector::all());
            std::optional<double> cool =
                op.quantity("to_temp") ? std::optional<double>(op.quantity("to_temp")->value) : std::nullopt;
            out.push_back(energy(P::AE, vessel, temp, time));
            out.push_back(energy(P::SE, vessel, cool, time));
            out.push_back(sm);
            break;
        }
        case UnitOpKind::Distil: {
            // heat, draw off the vapour, cool the pot, collect the condensate
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::line();
            sm.select = species_selector(op, "species", Selector::all());
            Primitive am = make(P::AM, op.symbol("to").value_or(""));
            am.counterpart = Endpoint::line();
            out.push_back(energy(P::AE, vessel, temp, time));
            out.push_back(sm);
            out.push_back(energy(P::SE, vessel, kAmbientTemp, time));
            out.push_back(am);
            break;
        }
        case UnitOpKind::Sublime: {
            // vacuum off the volatile solid, heat, cool the window, collect
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::line();
            sm.select = species_selector(op, "species", Selector::all());
            Primitive am = make(P::AM, op.symbol("to").value_or(""));
            am.counterpart = Endpoint::line();
            out.push_back(sm);
            out.push_back(energy(P::AE, vessel, temp, time));
            out.push_back(energy(P::SE, vessel, kAmbientTemp, time));
            out.push_back(am);
            break;
        }
        case UnitOpKind::Filter: {
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::vessel(op.symbol("to").value_or(""));
            sm.select = species_selector(op, "species", Selector::all());
            out.push_back(sm);
            break;
        }
        case UnitOpKind::Clean: {
            Primitive am = make(P::AM, vessel);
            am.counterpart = Endpoint::reagent(op.symbol("solvent").value_or(""));
            am.amount = op.quantity("amount");
            Primitive sm = make(P::SM, vessel);
            sm.counterpart = Endpoint::vessel(kWasteVessel);
            out.push_back(am);
            out.push_back(sm);
            break;
        }
    }
    return out;
}

}  // namespace chemputer
