#include "chemputer/chemlang.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "chemputer/graph.hpp"
#include "chemputer/primitives.hpp"

namespace chemputer::chemlang {

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::Syntax: return "SyntaxError";
        case ParseErrorKind::UnknownStepKind: return "UnknownStepKind";
        case ParseErrorKind::DuplicateReagent: return "DuplicateReagent";
        case ParseErrorKind::UndeclaredReference: return "UndeclaredReference";
        case ParseErrorKind::InvalidParameter: return "InvalidParameter";
    }
    return "?";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t line, std::size_t column, const std::string& message)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + std::string(to_string(kind)) + ": " +
            message),
      kind_(kind),
      line_(line),
      column_(column) {}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok type = Tok::End;
    std::string text;
    std::size_t line = 1;
    std::size_t col = 1;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.col = col_;
            if (pos_ >= src_.size()) {
                t.type = Tok::End;
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (ident_start(c)) {
                t.type = Tok::Ident;
                while (pos_ < src_.size() && ident_char(src_[pos_])) t.text += advance();
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       ((c == '-' || c == '+') && pos_ + 1 < src_.size() &&
                        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                t.type = Tok::Number;
                t.text = lex_number();
            } else if (c == '"') {
                t.type = Tok::String;
                t.text = lex_string(t);
            } else if (std::string_view("{}()[]=:,@").find(c) != std::string_view::npos) {
                t.type = Tok::Punct;
                t.text = std::string(1, advance());
            } else {
                throw ParseError(ParseErrorKind::Syntax, line_, col_, std::string("unexpected character '") + c + "'");
            }
            out.push_back(std::move(t));
        }
    }

private:
    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string lex_number() {
        std::string s;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) s += advance();
        };
        if (src_[pos_] == '-' || src_[pos_] == '+') s += advance();
        digits();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            s += advance();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                s += advance();
                if (src_[pos_] == '+' || src_[pos_] == '-') s += advance();
                digits();
            }
        }
        return s;
    }

    std::string lex_string(const Token& start) {
        advance();  // opening quote
        std::string s;
        for (;;) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') {
                throw ParseError(ParseErrorKind::Syntax, start.line, start.col, "unterminated string");
            }
            char c = advance();
            if (c == '"') return s;
            if (c == '\\') {
                if (pos_ >= src_.size()) break;
                char e = advance();
                if (e == 'n') {
                    s += '\n';
                } else if (e == '"' || e == '\\') {
                    s += e;
                } else {
                    throw ParseError(ParseErrorKind::Syntax, line_, col_ - 1, "unknown escape");
                }
            } else {
                s += c;
            }
        }
        throw ParseError(ParseErrorKind::Syntax, start.line, start.col, "unterminated string");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Parameter schema

enum class ParamType { Vessel, Reagent, Species, Temp, Time, Amount, Fraction, Volume };

struct ParamSpec {
    ParamType type;
    bool required;
};

using Schema = std::map<std::string, ParamSpec>;

const Schema& schema_for(UnitOpKind kind) {
    static const std::map<UnitOpKind, Schema> schemas = [] {
        using T = ParamType;
        std::map<UnitOpKind, Schema> s;
        s[UnitOpKind::Add] = {{"vessel", {T::Vessel, true}}, {"reagent", {T::Reagent, true}},
                              {"amount", {T::Amount, false}}};
        s[UnitOpKind::Transfer] = {{"from", {T::Vessel, true}},      {"to", {T::Vessel, true}},
                                   {"species", {T::Species, false}}, {"fraction", {T::Fraction, false}},
                                   {"amount", {T::Amount, false}},   {"volume", {T::Volume, false}}};
        s[UnitOpKind::HeatStir] = {{"vessel", {T::Vessel, true}}, {"temp", {T::Temp, true}}, {"time", {T::Time, true}}};
        s[UnitOpKind::Chill] = s[UnitOpKind::HeatStir];
        s[UnitOpKind::ReactHot] = {{"vessel", {T::Vessel, true}},    {"temp", {T::Temp, true}},
                                   {"time", {T::Time, true}},        {"reagent", {T::Reagent, false}},
                                   {"from", {T::Vessel, false}},     {"species", {T::Species, false}},
                                   {"fraction", {T::Fraction, false}}, {"amount", {T::Amount, false}}};
        s[UnitOpKind::ReactCold] = s[UnitOpKind::ReactHot];
        s[UnitOpKind::Separate] = {{"vessel", {T::Vessel, true}},  {"solvent", {T::Reagent, true}},
                                   {"species", {T::Species, true}}, {"to", {T::Vessel, true}},
                                   {"time", {T::Time, false}},     {"amount", {T::Amount, false}}};
        s[UnitOpKind::Dry] = {{"vessel", {T::Vessel, true}},
                              {"temp", {T::Temp, true}},
                              {"remove", {T::Species, false}},
                              {"to", {T::Vessel, false}},
                              {"time", {T::Time, false}}};
        s[UnitOpKind::Evaporate] = s[UnitOpKind::Dry];
        s[UnitOpKind::Crystallise] = {{"vessel", {T::Vessel, true}},  {"temp", {T::Temp, true}},
                                      {"to_temp", {T::Temp, true}},   {"species", {T::Species, true}},
                                      {"to", {T::Vessel, true}},      {"time", {T::Time, false}}};
        s[UnitOpKind::Distil] = {{"vessel", {T::Vessel, true}},  {"temp", {T::Temp, true}},
                                 {"species", {T::Species, true}}, {"to", {T::Vessel, true}},
                                 {"time", {T::Time, false}}};
        s[UnitOpKind::Sublime] = s[UnitOpKind::Distil];
        s[UnitOpKind::Filter] = {{"vessel", {T::Vessel, true}}, {"to", {T::Vessel, true}},
                                 {"species", {T::Species, false}}};
        s[UnitOpKind::Clean] = {{"vessel", {T::Vessel, true}}, {"solvent", {T::Reagent, true}},
                                {"amount", {T::Amount, false}}};
        return s;
    }();
    return schemas.at(kind);
}

bool type_matches(ParamType type, const ParamValue& v) {
    switch (type) {
        case ParamType::Vessel:
        case ParamType::Reagent:
        case ParamType::Species:
            return std::holds_alternative<Symbol>(v);
        case ParamType::Temp:
            return std::holds_alternative<Quantity>(v) && std::get<Quantity>(v).unit == Unit::Celsius;
        case ParamType::Time:
            return std::holds_alternative<Quantity>(v) && std::get<Quantity>(v).unit == Unit::Second;
        case ParamType::Amount:
            return std::holds_alternative<Quantity>(v) &&
                   (std::get<Quantity>(v).unit == Unit::Mol || std::get<Quantity>(v).unit == Unit::Gram);
        case ParamType::Fraction:
            return std::holds_alternative<double>(v);
        case ParamType::Volume:
            return std::holds_alternative<Quantity>(v) && std::get<Quantity>(v).unit == Unit::Millilitre;
    }
    return false;
}

struct Position {
    std::size_t line = 0;
    std::size_t col = 0;
};

/// Source positions kept alongside the program for error reporting.
struct StepPositions {
    Position step;
    std::map<std::string, Position> params;
};

// Kind inferred for vessels of a program that omits its hardware section.
std::string infer_vessel_kind(const std::set<UnitOpKind>& hosted) {
    static const NodeKind candidates[] = {NodeKind::Reactor, NodeKind::Separator, NodeKind::Rotavap,
                                          NodeKind::Filter};
    if (hosted.empty()) return std::string(to_string(NodeKind::Storage));
    for (NodeKind k : candidates) {
        auto allowed = allowed_capabilities(k);
        if (std::includes(allowed.begin(), allowed.end(), hosted.begin(), hosted.end())) {
            return std::string(to_string(k));
        }
    }
    return std::string(to_string(NodeKind::Reactor));
}

bool is_builtin_vessel(const std::string& v) { return v == kWasteVessel || v == kProductVessel; }

void check_steps(ChemProgram& program, const std::vector<StepPositions>& positions, bool hardware_declared) {
    auto pos_of = [&](std::size_t i, const std::string& key) {
        if (i >= positions.size()) return Position{};
        auto it = positions[i].params.find(key);
        return it == positions[i].params.end() ? positions[i].step : it->second;
    };
    auto fail = [&](ParseErrorKind kind, Position p, const std::string& msg) {
        throw ParseError(kind, p.line, p.col, msg);
    };

    if (program.steps.empty()) {
        fail(ParseErrorKind::Syntax, positions.empty() ? Position{} : positions.front().step,
             "program has no steps");
    }
    std::set<std::string> reagent_ids;
    for (const auto& r : program.reagents) {
        if (!reagent_ids.insert(r.id).second) {
            fail(ParseErrorKind::DuplicateReagent, {}, "duplicate reagent '" + r.id + "'");
        }
        if (!(r.amount.value > 0.0)) fail(ParseErrorKind::InvalidParameter, {}, "reagent '" + r.id + "' amount must be > 0");
    }
    std::set<std::string> declared_vessels;
    for (const auto& h : program.hardware_reqs) {
        if (!node_kind_from_name(h.kind)) {
            fail(ParseErrorKind::InvalidParameter, {}, "unknown hardware kind '" + h.kind + "'");
        }
        if (!declared_vessels.insert(h.vessel).second) {
            fail(ParseErrorKind::InvalidParameter, {}, "duplicate hardware vessel '" + h.vessel + "'");
        }
    }

    std::vector<std::string> implicit_order;
    std::map<std::string, std::set<UnitOpKind>> implicit_hosted;

    for (std::size_t i = 0; i < program.steps.size(); ++i) {
        const auto& op = program.steps[i];
        const Schema& schema = schema_for(op.kind);
        for (const auto& [key, value] : op.params) {
            auto it = schema.find(key);
            if (it == schema.end()) {
                fail(ParseErrorKind::InvalidParameter, pos_of(i, key),
                     "unknown parameter '" + key + "' for " + std::string(keyword(op.kind)));
            }
            if (!type_matches(it->second.type, value)) {
                fail(ParseErrorKind::InvalidParameter, pos_of(i, key), "parameter '" + key + "' has the wrong type");
            }
        }
        for (const auto& [key, spec] : schema) {
            if (spec.required && !op.has(key)) {
                fail(ParseErrorKind::InvalidParameter, pos_of(i, ""),
                     std::string(keyword(op.kind)) + " requires parameter '" + key + "'");
            }
        }
        if (is_reaction_op(op.kind) && op.has("reagent") == op.has("from")) {
            fail(ParseErrorKind::InvalidParameter, pos_of(i, ""),
                 std::string(keyword(op.kind)) + " takes exactly one of 'reagent' or 'from'");
        }
        for (const auto& [key, spec] : schema) {
            auto sym = op.symbol(key);
            if (!sym) continue;
            if (spec.type == ParamType::Reagent && !reagent_ids.count(*sym)) {
                fail(ParseErrorKind::UndeclaredReference, pos_of(i, key), "undeclared reagent '" + *sym + "'");
            }
            if (spec.type == ParamType::Vessel) {
                const std::string& v = *sym;
                if (is_builtin_vessel(v) || program.is_source_vessel(v) || declared_vessels.count(v)) continue;
                if (hardware_declared) {
                    fail(ParseErrorKind::UndeclaredReference, pos_of(i, key), "undeclared vessel '" + v + "'");
                }
                if (!implicit_hosted.count(v)) implicit_order.push_back(v);
                auto& hosted = implicit_hosted[v];
                if (!is_movement_op(op.kind) && key == "vessel") hosted.insert(op.kind);
            }
        }
    }
    for (const auto& v : implicit_order) {
        program.hardware_reqs.push_back({v, infer_vessel_kind(implicit_hosted[v])});
    }
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ChemProgram parse() {
        ChemProgram prog;
        expect_word("procedure");
        const Token& name = expect(Tok::String, "procedure name string");
        prog.name = name.text;
        expect_punct("{");
        std::set<std::string> seen;
        bool hardware_declared = false;
        std::vector<StepPositions> positions;
        while (!is_punct("}")) {
            const Token& sec = expect(Tok::Ident, "section name");
            if (!seen.insert(sec.text).second) error(sec, "duplicate section '" + sec.text + "'");
            if (sec.text == "metadata") {
                prog.metadata = parse_kv_block();
            } else if (sec.text == "reagents") {
                parse_reagents(prog);
            } else if (sec.text == "hardware") {
                hardware_declared = true;
                parse_hardware(prog);
            } else if (sec.text == "steps") {
                parse_steps(prog, positions);
            } else {
                error(sec, "unknown section '" + sec.text + "'");
            }
        }
        expect_punct("}");
        if (peek().type != Tok::End) error(peek(), "trailing input after procedure");
        if (!seen.count("steps")) error(peek(), "program has no steps");
        check_steps(prog, positions, hardware_declared);
        return prog;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool is_punct(std::string_view p) const { return peek().type == Tok::Punct && peek().text == p; }

    [[noreturn]] void error(const Token& t, const std::string& msg, ParseErrorKind kind = ParseErrorKind::Syntax) {
        throw ParseError(kind, t.line, t.col, msg);
    }

    const Token& expect(Tok type, const std::string& what) {
        if (peek().type != type) error(peek(), "expected " + what + describe(peek()));
        return next();
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) error(peek(), "expected '" + std::string(p) + "'" + describe(peek()));
        next();
    }
    void expect_word(std::string_view w) {
        if (peek().type != Tok::Ident || peek().text != w) error(peek(), "expected '" + std::string(w) + "'" + describe(peek()));
        next();
    }
    static std::string describe(const Token& t) {
        if (t.type == Tok::End) return ", found end of input";
        return ", found '" + t.text + "'";
    }

    std::string parse_species() {
        std::string s = expect(Tok::Ident, "species id").text;
        if (is_punct(":")) {
            next();
            s += ":" + expect(Tok::Ident, "species id").text;
        }
        return s;
    }

    std::string parse_meta_value() {
        const Token& t = peek();
        if (t.type == Tok::Ident || t.type == Tok::Number || t.type == Tok::String) return next().text;
        error(t, "expected metadata value" + describe(t));
    }

    std::map<std::string, std::string> parse_kv_block() {
        std::map<std::string, std::string> kv;
        expect_punct("{");
        while (!is_punct("}")) {
            const Token& key = expect(Tok::Ident, "metadata key");
            expect_punct("=");
            if (!kv.emplace(key.text, parse_meta_value()).second) error(key, "duplicate metadata key '" + key.text + "'");
        }
        expect_punct("}");
        return kv;
    }

    Quantity parse_quantity(const Token& number, const Token& unit) {
        double v = parse_double(number.text);
        const std::string& u = unit.text;
        if (u == "mol") return {v, Unit::Mol};
        if (u == "mmol") return {v / 1000.0, Unit::Mol};
        if (u == "g") return {v, Unit::Gram};
        if (u == "mg") return {v / 1000.0, Unit::Gram};
        if (u == "mL") return {v, Unit::Millilitre};
        if (u == "C") return {v, Unit::Celsius};
        if (u == "s") return {v, Unit::Second};
        if (u == "min") return {v * 60.0, Unit::Second};
        if (u == "h") return {v * 3600.0, Unit::Second};
        error(unit, "unknown unit '" + u + "'");
    }

    static bool is_unit(const Token& t) {
        static const std::set<std::string> units = {"mol", "mmol", "g", "mg", "mL", "C", "s", "min", "h"};
        return t.type == Tok::Ident && units.count(t.text);
    }

    void parse_reagents(ChemProgram& prog) {
        expect_punct("{");
        std::set<std::string> ids;
        while (!is_punct("}")) {
            const Token& id = expect(Tok::Ident, "reagent id");
            if (!ids.insert(id.text).second) {
                error(id, "duplicate reagent '" + id.text + "'", ParseErrorKind::DuplicateReagent);
            }
            ReagentDecl r;
            r.id = id.text;
            expect_punct(":");
            r.species = parse_species();
            const Token& num = expect(Tok::Number, "amount");
            const Token& unit = expect(Tok::Ident, "amount unit");
            r.amount = parse_quantity(num, unit);
            if (r.amount.unit != Unit::Mol && r.amount.unit != Unit::Gram) error(unit, "reagent amount must be in mol or g");
            if (!(r.amount.value > 0.0)) error(num, "reagent amount must be > 0", ParseErrorKind::InvalidParameter);
            expect_punct("@");
            r.source_vessel = expect(Tok::Ident, "source vessel").text;
            const Token& role = expect(Tok::Ident, "reagent role");
            if (role.text == "reagent") {
                r.role = ReagentRole::Reagent;
            } else if (role.text == "catalyst") {
                r.role = ReagentRole::Catalyst;
            } else if (role.text == "solvent") {
                r.role = ReagentRole::Solvent;
            } else {
                error(role, "unknown reagent role '" + role.text + "'");
            }
            prog.reagents.push_back(std::move(r));
        }
        expect_punct("}");
    }

    void parse_hardware(ChemProgram& prog) {
        expect_punct("{");
        while (!is_punct("}")) {
            HardwareReq h;
            const Token& v = expect(Tok::Ident, "vessel id");
            h.vessel = v.text;
            expect_punct(":");
            const Token& k = expect(Tok::Ident, "hardware kind");
            if (!node_kind_from_name(k.text)) error(k, "unknown hardware kind '" + k.text + "'", ParseErrorKind::InvalidParameter);
            h.kind = k.text;
            if (prog.find_hardware(h.vessel)) error(v, "duplicate hardware vessel '" + h.vessel + "'", ParseErrorKind::InvalidParameter);
            prog.hardware_reqs.push_back(std::move(h));
        }
        expect_punct("}");
    }

    void parse_steps(ChemProgram& prog, std::vector<StepPositions>& positions) {
        expect_punct("{");
        while (!is_punct("}")) {
            const Token& kw = expect(Tok::Ident, "step keyword");
            auto kind = unit_op_from_keyword(kw.text);
            if (!kind) error(kw, "unknown step kind '" + kw.text + "'", ParseErrorKind::UnknownStepKind);
            UnitOperation op;
            op.kind = *kind;
            StepPositions sp;
            sp.step = {kw.line, kw.col};
            expect_punct("(");
            while (!is_punct(")")) {
                const Token& key = expect(Tok::Ident, "parameter name");
                expect_punct("=");
                if (op.params.count(key.text)) {
                    error(key, "duplicate parameter '" + key.text + "'", ParseErrorKind::InvalidParameter);
                }
                sp.params[key.text] = {key.line, key.col};
                op.params.emplace(key.text, parse_value());
                if (!is_punct(")")) expect_punct(",");
            }
            expect_punct(")");
            if (is_punct("[")) {
                next();
                while (!is_punct("]")) {
                    const Token& key = expect(Tok::Ident, "metadata key");
                    expect_punct("=");
                    if (!op.metadata.emplace(key.text, parse_meta_value()).second) {
                        error(key, "duplicate metadata key '" + key.text + "'");
                    }
                    if (!is_punct("]")) expect_punct(",");
                }
                expect_punct("]");
            }
            prog.steps.push_back(std::move(op));
            positions.push_back(std::move(sp));
        }
        expect_punct("}");
    }

    ParamValue parse_value() {
        const Token& t = peek();
        if (t.type == Tok::Number) {
            next();
            if (is_unit(peek())) return parse_quantity(t, next());
            return parse_double(t.text);
        }
        if (t.type == Tok::String) return Text{next().text};
        if (t.type == Tok::Ident) return Symbol{parse_species()};
        error(t, "expected parameter value" + describe(t));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Formatter

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out += c;
        }
    }
    return out + "\"";
}

bool is_bare_token(const std::string& s) {
    if (s.empty()) return false;
    try {
        auto toks = Lexer(s).run();
        return toks.size() == 2 && toks[0].text == s && (toks[0].type == Tok::Ident || toks[0].type == Tok::Number);
    } catch (const ParseError&) {
        return false;
    }
}

std::string meta_value(const std::string& s) { return is_bare_token(s) ? s : quote(s); }

std::string format_value(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Symbol>) {
                return x.text;
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(x);
            } else if constexpr (std::is_same_v<T, Quantity>) {
                return format_double(x.value) + " " + std::string(to_string(x.unit));
            } else {
                return quote(x.text);
            }
        },
        v);
}

}  // namespace

ChemProgram parse_program(std::string_view source) { return Parser(Lexer(source).run()).parse(); }

void check_program(const ChemProgram& program) {
    ChemProgram copy = program;
    check_steps(copy, {}, true);
}

std::string format_program(const ChemProgram& program) {
    std::ostringstream out;
    out << "procedure " << quote(program.name) << " {\n";
    if (!program.metadata.empty()) {
        out << "  metadata {\n";
        for (const auto& [k, v] : program.metadata) out << "    " << k << " = " << meta_value(v) << "\n";
        out << "  }\n";
    }
    if (!program.reagents.empty()) {
        out << "  reagents {\n";
        for (const auto& r : program.reagents) {
            out << "    " << r.id << ": " << r.species << " " << format_double(r.amount.value) << " "
                << to_string(r.amount.unit) << " @" << r.source_vessel << " " << to_string(r.role) << "\n";
        }
        out << "  }\n";
    }
    if (!program.hardware_reqs.empty()) {
        out << "  hardware {\n";
        for (const auto& h : program.hardware_reqs) out << "    " << h.vessel << ": " << h.kind << "\n";
        out << "  }\n";
    }
    out << "  steps {\n";
    for (const auto& op : program.steps) {
        out << "    " << keyword(op.kind) << "(";
        bool first = true;
        for (const auto& [k, v] : op.params) {
            if (!first) out << ", ";
            first = false;
            out << k << "=" << format_value(v);
        }
        out << ")";
        if (!op.metadata.empty()) {
            out << " [";
            first = true;
            for (const auto& [k, v] : op.metadata) {
                if (!first) out << ", ";
                first = false;
                out << k << "=" << meta_value(v);
            }
            out << "]";
        }
        out << "\n";
    }
    out << "  }\n}\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Step statistics

std::string_view to_string(StepCategory c) {
    switch (c) {
        case StepCategory::AddMatter: return "AddMatter";
        case StepCategory::SubtractMatter: return "SubtractMatter";
        case StepCategory::AddEnergy: return "AddEnergy";
        case StepCategory::SubtractEnergy: return "SubtractEnergy";
        case StepCategory::Composite: return "Composite";
    }
    return "?";
}

StepCategory primary_category(UnitOpKind kind) {
    switch (primitive_sequence(kind).front()) {
        case PrimitiveKind::AM: return StepCategory::AddMatter;
        case PrimitiveKind::SM: return StepCategory::SubtractMatter;
        case PrimitiveKind::AE: return StepCategory::AddEnergy;
        case PrimitiveKind::SE: return StepCategory::SubtractEnergy;
    }
    return StepCategory::Composite;
}

bool is_composite(UnitOpKind kind) { return primitive_sequence(kind).size() > 2; }

StepHistogram classify_steps(const ChemProgram& program) {
    std::map<int, StepHistogram::Row> rows;
    int current = 1;
    for (const auto& op : program.steps) {
        if (auto it = op.metadata.find("reaction_step"); it != op.metadata.end()) {
            double v = 0.0;
            try {
                v = parse_double(it->second);
            } catch (const Error&) {
                throw Error("reaction_step must be an integer, got '" + it->second + "'");
            }
            if (v < 1 || v != static_cast<int>(v)) throw Error("reaction_step must be a positive integer");
            current = static_cast<int>(v);
        }
        auto& row = rows[current];
        row.reaction_step = current;
        row.counts[primary_category(op.kind)] += 1;
        if (is_composite(op.kind)) row.counts[StepCategory::Composite] += 1;
        row.ops += 1;
    }
    StepHistogram h;
    int running = 0;
    for (auto& [step, row] : rows) {
        running += row.ops;
        h.per_reaction_step.push_back(row);
        h.cumulative.push_back(running);
    }
    return h;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw PreconditionError("linear_fit: x and y differ in length");
    LinearFit fit;
    fit.points = x.size();
    if (x.size() < 2) return fit;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.defined = true;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return fit;
}

namespace {

UnitOperation op_of(UnitOpKind kind, std::map<std::string, ParamValue> params) {
    UnitOperation op;
    op.kind = kind;
    op.params = std::move(params);
    return op;
}

Quantity celsius(double v) { return {v, Unit::Celsius}; }
Quantity seconds(double v) { return {v, Unit::Second}; }
Quantity mol(double v) { return {v, Unit::Mol}; }

// One reaction step's worth of work; cycled when more ops are requested.
std::vector<UnitOperation> synthetic_template() {
    return {
        op_of(UnitOpKind::Add, {{"vessel", Symbol{"RX1"}}, {"reagent", Symbol{"sm"}}, {"amount", mol(0.1)}}),
        op_of(UnitOpKind::Add, {{"vessel", Symbol{"RX1"}}, {"reagent", Symbol{"solv"}}, {"amount", mol(0.5)}}),
        op_of(UnitOpKind::HeatStir, {{"vessel", Symbol{"RX1"}}, {"temp", celsius(40)}, {"time", seconds(600)}}),
        op_of(UnitOpKind::ReactHot, {{"vessel", Symbol{"RX1"}}, {"reagent", Symbol{"reag"}}, {"amount", mol(0.1)},
                                     {"temp", celsius(80)}, {"time", seconds(3600)}}),
        op_of(UnitOpKind::Chill, {{"vessel", Symbol{"RX1"}}, {"temp", celsius(5)}, {"time", seconds(900)}}),
        op_of(UnitOpKind::Transfer, {{"from", Symbol{"RX1"}}, {"to", Symbol{"SEP1"}}}),
        op_of(UnitOpKind::Separate, {{"vessel", Symbol{"SEP1"}}, {"solvent", Symbol{"solv"}}, {"amount", mol(0.2)},
                                     {"species", Symbol{"P"}}, {"to", Symbol{"RV1"}}}),
        op_of(UnitOpKind::Transfer, {{"from", Symbol{"SEP1"}}, {"to", Symbol{"waste"}}}),
        op_of(UnitOpKind::Dry, {{"vessel", Symbol{"RV1"}}, {"temp", celsius(60)}}),
        op_of(UnitOpKind::Evaporate, {{"vessel", Symbol{"RV1"}}, {"temp", celsius(50)}}),
        op_of(UnitOpKind::Crystallise, {{"vessel", Symbol{"RV1"}}, {"temp", celsius(70)}, {"to_temp", celsius(0)},
                                        {"species", Symbol{"P"}}, {"to", Symbol{"F1"}}}),
        op_of(UnitOpKind::Filter, {{"vessel", Symbol{"F1"}}, {"species", Symbol{"P"}}, {"to", Symbol{"S1"}}}),
        op_of(UnitOpKind::Clean, {{"vessel", Symbol{"RX1"}}, {"solvent", Symbol{"solv"}}, {"amount", mol(0.1)}}),
        op_of(UnitOpKind::Distil, {{"vessel", Symbol{"RV1"}}, {"temp", celsius(90)}, {"species", Symbol{"P"}},
                                   {"to", Symbol{"S1"}}}),
        op_of(UnitOpKind::Transfer, {{"from", Symbol{"S1"}}, {"to", Symbol{"product"}}}),
    };
}

}  // namespace

ChemProgram synthetic_program(int reaction_steps, int ops_per_step) {
    if (reaction_steps < 1 || ops_per_step < 1) throw PreconditionError("synthetic_program needs positive sizes");
    ChemProgram p;
    p.name = "synthetic_k" + std::to_string(reaction_steps) + "_t" + std::to_string(ops_per_step);
    const double n = reaction_steps;
    p.reagents = {
        {"sm", "SM", mol(0.1 * n), "R1", ReagentRole::Reagent},
        {"reag", "RG", mol(0.1 * n), "R2", ReagentRole::Reagent},
        {"solv", "SOLV", mol(1.0 * n), "R3", ReagentRole::Solvent},
    };
    p.hardware_reqs = {{"RX1", "Reactor"}, {"SEP1", "Separator"}, {"RV1", "Rotavap"}, {"F1", "Filter"},
                       {"S1", "Storage"}};
    const auto tmpl = synthetic_template();
    for (int k = 1; k <= reaction_steps; ++k) {
        for (int i = 0; i < ops_per_step; ++i) {
            UnitOperation op = tmpl[static_cast<std::size_t>(i) % tmpl.size()];
            op.metadata["reaction_step"] = std::to_string(k);
            p.steps.push_back(std::move(op));
        }
    }
    p.metadata["generator"] = "synthetic";
    return p;
}

}  // namespace chemputer::chemlang
