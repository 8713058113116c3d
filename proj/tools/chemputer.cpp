// chemputer: command-line front end.
//
// Exit codes: 0 q_out / success, 10 q_uout, 11 q_nout, 12 q_fail,
// 1 parse error, 2 I/O, configuration or validation error,
// 3 unreachable target, 4 program infeasible on the hardware graph.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "chemputer/assembly.hpp"
#include "chemputer/chemlang.hpp"
#include "chemputer/chempiler.hpp"
#include "chemputer/cstm.hpp"
#include "chemputer/dec.hpp"
#include "chemputer/graph.hpp"
#include "chemputer/json_util.hpp"
#include "chemputer/rules.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace chemputer;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit : int {
    kOk = 0,
    kParse = 1,
    kConfig = 2,
    kUnreachable = 3,
    kInfeasible = 4,
    kUOut = 10,
    kNOut = 11,
    kFail = 12,
};

struct ConfigError : Error {
    using Error::Error;
};

std::string read_file(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

// Rewrites `path` via a sibling temporary and rename.
void replace_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    write_file(tmp, content);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot replace '" + path + "': " + ec.message());
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_file(out_path, content);
    }
}

int exit_for(rules::HaltKind k) {
    switch (k) {
        case rules::HaltKind::Out: return kOk;
        case rules::HaltKind::UOut: return kUOut;
        case rules::HaltKind::NOut: return kNOut;
        case rules::HaltKind::Fail: return kFail;
    }
    return kFail;
}

ChemProgram load_program(const std::string& path) { return chemlang::parse_program(read_file(path)); }

rules::RuleDatabase load_db(const std::string& path) {
    if (path.empty()) return {};
    return rules::load_rules(read_file(path));
}

HardwareGraph load_graph_or_default(const std::string& path) {
    return path.empty() ? build_default_graph() : load_graph(read_file(path));
}

std::set<std::string> split_list(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

std::string pathway_json(const rules::Pathway& p) {
    ojson j;
    j["target"] = p.target;
    j["steps"] = ojson::array();
    for (const auto& s : p.steps) {
        ojson inputs = ojson::object();
        for (const auto& [sp, c] : s.inputs) inputs[sp] = c;
        j["steps"].push_back({{"rule", s.rule_id}, {"inputs", inputs}, {"epsilon", s.epsilon}});
    }
    j["expected_perfect_fraction"] = p.expected_perfect_fraction;
    return j.dump(2) + "\n";
}

assembly::MonteCarloConfig load_mc_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    assembly::MonteCarloConfig c;
    jsonutil::require_object(j, "mc config",
                             {"n0", "eps0", "k_growth", "systematic_sd", "ai_max", "trajectories", "seed",
                              "redraw_systematic_per_step"},
                             {});
    if (j.contains("n0")) c.n0 = jsonutil::get_number(j, "n0");
    if (j.contains("eps0")) {
        c.eps0.clear();
        for (const auto& e : jsonutil::require_array(j, "eps0")) {
            if (!e.is_number()) throw ConfigError("eps0 entries must be numbers");
            c.eps0.push_back(e.get<double>());
        }
    }
    if (j.contains("k_growth")) c.k_growth = jsonutil::get_number(j, "k_growth");
    if (j.contains("systematic_sd")) c.systematic_sd = jsonutil::get_number(j, "systematic_sd");
    if (j.contains("ai_max")) c.ai_max = static_cast<int>(jsonutil::get_number(j, "ai_max"));
    if (j.contains("trajectories")) c.trajectories = static_cast<int>(jsonutil::get_number(j, "trajectories"));
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("redraw_systematic_per_step")) {
        c.redraw_systematic_per_step = jsonutil::get_bool(j, "redraw_systematic_per_step");
    }
    c.validate();
    return c;
}

std::string ledger_summary(const cstm::ExecutionTrace& t) {
    auto l = cstm::mass_ledger(t);
    std::ostringstream os;
    os << "halt: " << rules::to_string(t.halt.kind) << " (" << t.halt.reason << ")\n";
    os << "trace: " << t.id << "\n";
    os << "steps: " << t.final_state.step_count << "\n";
    os << "ledger_residual: " << format_double(l.residual) << "\n";
    os << "product:";
    if (l.total_product.empty()) os << " (empty)";
    for (const auto& [sp, a] : l.total_product) os << " " << sp << "=" << format_double(a);
    os << "\n";
    return os.str();
}

// --------------------------------------------------------------------------

struct Common {
    std::string rules;
    std::string graph;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_parse(const std::string& path, const std::string& out) {
    ChemProgram p = load_program(path);
    emit(out, chemlang::format_program(p));
    if (!out.empty()) cli::write_manifest({"parse", path == "-" ? std::vector<std::string>{} : std::vector{path},
                                           {out}, std::nullopt});
    return kOk;
}

int cmd_validate(const std::string& path, const Common& c) {
    ChemProgram p = load_program(path);
    HardwareGraph g = load_graph_or_default(c.graph);
    auto report = chempiler::validate_program(p, g);
    emit(c.out, chempiler::report_to_json(report));
    if (!c.out.empty()) {
        std::vector<std::string> in{path};
        if (!c.graph.empty()) in.push_back(c.graph);
        cli::write_manifest({"validate", in, {c.out}, std::nullopt});
    }
    return report.ok() ? kOk : kInfeasible;
}

struct RunArgs {
    std::uint64_t budget = cstm::kDefaultBudget;
    std::string trace;
    bool persist = false;
    bool explore = false;
    std::string latent;
    bool compiled = false;
};

int cmd_run(const std::string& path, const Common& c, const RunArgs& a) {
    ChemProgram p = load_program(path);
    rules::RuleDatabase db = load_db(c.rules);
    rules::RuleDatabase latent = load_db(a.latent);
    cstm::RunOptions opts;
    opts.seed = c.seed;
    opts.explore = a.explore;
    opts.latent = a.latent.empty() ? nullptr : &latent;
    cstm::RunResult r;
    if (a.compiled || !c.graph.empty()) {
        auto compiled = chempiler::chempile(p, load_graph_or_default(c.graph), db);
        if (!compiled.plan) {
            std::cerr << chempiler::report_to_json(compiled.report);
            return kInfeasible;
        }
        r = cstm::run_machine(chempiler::plan_machine(*compiled.plan, db, a.budget), db, opts);
        r.trace.id = "trace-" + to_hex(fnv1a(p.name, fnv1a(std::to_string(c.seed))));
        r.trace.halt.trace_ref = r.trace.id;
    } else {
        r = cstm::run(p, db, a.budget, opts);
    }
    std::vector<std::string> outputs;
    if (!a.trace.empty()) {
        write_file(a.trace, cstm::trace_to_jsonl(r.trace));
        outputs.push_back(a.trace);
    }
    if (a.persist) {
        if (c.rules.empty()) throw ConfigError("--persist-rules needs --rules");
        replace_file(c.rules, rules::save_rules(r.db));
    }
    emit(c.out, ledger_summary(r.trace));
    if (!c.out.empty()) outputs.push_back(c.out);
    if (!outputs.empty()) {
        std::vector<std::string> in{path};
        if (!c.rules.empty()) in.push_back(c.rules);
        if (!c.graph.empty()) in.push_back(c.graph);
        cli::write_manifest({"run", in, outputs, c.seed});
    }
    return exit_for(r.trace.halt.kind);
}

int cmd_plan(const Common& c, const std::string& target, const std::string& stock, int depth,
             const std::string& program_out) {
    rules::RuleDatabase db = load_db(c.rules);
    rules::Pathway pw;
    try {
        pw = rules::plan_pathway(db, target, split_list(stock), depth);
    } catch (const rules::PlanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == rules::PlanErrorKind::UnknownTarget ? kConfig : kUnreachable;
    }
    emit(c.out, pathway_json(pw));
    std::vector<std::string> outputs;
    if (!c.out.empty()) outputs.push_back(c.out);
    if (!program_out.empty()) {
        if (pw.steps.empty()) throw ConfigError("target is in stock; there is no program to write");
        write_file(program_out, chemlang::format_program(chempiler::pathway_program(pw, db)));
        outputs.push_back(program_out);
    }
    if (!outputs.empty()) cli::write_manifest({"plan", {c.rules}, outputs, std::nullopt});
    return kOk;
}

int cmd_compile(const std::string& path, const Common& c) {
    ChemProgram p = load_program(path);
    rules::RuleDatabase db = load_db(c.rules);
    auto compiled = chempiler::chempile(p, load_graph_or_default(c.graph), db);
    if (!compiled.plan) {
        emit(c.out, chempiler::report_to_json(compiled.report));
        return kInfeasible;
    }
    emit(c.out, chempiler::plan_to_json(*compiled.plan));
    if (!c.out.empty()) {
        std::vector<std::string> in{path};
        if (!c.rules.empty()) in.push_back(c.rules);
        if (!c.graph.empty()) in.push_back(c.graph);
        cli::write_manifest({"compile", in, {c.out}, std::nullopt});
    }
    return kOk;
}

int cmd_stats(const std::vector<std::string>& paths, int synthetic, int template_ops, const std::string& out) {
    std::vector<std::pair<std::string, ChemProgram>> progs;
    for (const auto& p : paths) progs.emplace_back(p, load_program(p));
    for (int k = 1; k <= synthetic; ++k) {
        auto prog = chemlang::synthetic_program(k, template_ops);
        progs.emplace_back(prog.name, prog);
    }
    if (progs.empty()) throw ConfigError("stats needs at least one program or --synthetic");
    std::ostringstream os;
    os << "program,reaction_step,ops,cumulative,AddMatter,SubtractMatter,AddEnergy,SubtractEnergy,Composite\n";
    std::vector<double> xs, ys;
    for (const auto& [name, prog] : progs) {
        auto h = chemlang::classify_steps(prog);
        for (std::size_t i = 0; i < h.per_reaction_step.size(); ++i) {
            const auto& row = h.per_reaction_step[i];
            auto count = [&](chemlang::StepCategory cat) { return row.counts[cat]; };
            os << prog.name << ',' << row.reaction_step << ',' << row.ops << ',' << h.cumulative[i] << ','
               << count(chemlang::StepCategory::AddMatter) << ',' << count(chemlang::StepCategory::SubtractMatter)
               << ',' << count(chemlang::StepCategory::AddEnergy) << ','
               << count(chemlang::StepCategory::SubtractEnergy) << ',' << count(chemlang::StepCategory::Composite)
               << '\n';
            xs.push_back(row.reaction_step);
            ys.push_back(h.cumulative[i]);
        }
    }
    auto fit = chemlang::linear_fit(xs, ys);
    os << "\nfit,slope,intercept,r_squared,points\n";
    if (fit.defined) {
        os << "cumulative_vs_step," << format_double(fit.slope) << ',' << format_double(fit.intercept) << ','
           << format_double(fit.r_squared) << ',' << fit.points << '\n';
    } else {
        os << "cumulative_vs_step,,,," << fit.points << '\n';
    }
    emit(out, os.str());
    if (!out.empty()) cli::write_manifest({"stats", paths, {out}, std::nullopt});
    return kOk;
}

int cmd_mc(const std::string& config, const std::string& out, const std::string& svg, std::optional<std::uint64_t> seed) {
    auto cfg = load_mc_config(read_file(config));
    if (seed) cfg.seed = *seed;
    auto res = assembly::monte_carlo(cfg);
    emit(out, assembly::mc_to_csv(res));
    std::vector<std::string> outputs;
    if (!out.empty()) outputs.push_back(out);
    if (!svg.empty()) {
        write_file(svg, assembly::mc_to_svg(res));
        outputs.push_back(svg);
    }
    if (!outputs.empty()) cli::write_manifest({"mc", {config}, outputs, cfg.seed});
    return kOk;
}

struct DecArgs {
    std::string policy;
    double eps = 0.0;
    int seeds = 200;
    bool compare = false;
    bool abstract_only = false;
    std::string trace;
};

int cmd_dec_run(const std::string& path, const Common& c, const DecArgs& a) {
    ChemProgram p = load_program(path);
    rules::RuleDatabase db = load_db(c.rules);
    dec::CorrectionPolicy policy = a.policy.empty() ? dec::CorrectionPolicy{} : dec::load_policy(read_file(a.policy));
    if (!(a.eps >= 0.0 && a.eps <= 1.0)) throw ConfigError("--inject-eps must be in [0, 1]");
    HardwareGraph g = load_graph_or_default(c.graph);
    const HardwareGraph* gp = a.abstract_only ? nullptr : &g;
    std::vector<std::string> in{path};
    if (!c.rules.empty()) in.push_back(c.rules);
    if (!a.policy.empty()) in.push_back(a.policy);
    if (a.compare) {
        if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
        auto cmp = dec::compare_paired(p, db, gp, policy, a.eps, a.seeds, c.seed);
        emit(c.out, dec::comparison_to_table(cmp, a.eps));
        if (!c.out.empty()) cli::write_manifest({"dec-run", in, {c.out}, c.seed});
        return kOk;
    }
    dec::DecOptions opts;
    opts.policy = policy;
    opts.injector.epsilon = a.eps;
    opts.seed = c.seed;
    auto run = dec::run_with_dec(p, db, gp, opts);
    std::vector<std::string> outputs;
    if (!a.trace.empty()) {
        write_file(a.trace, cstm::trace_to_jsonl(run.result.trace));
        outputs.push_back(a.trace);
    }
    std::ostringstream os;
    os << ledger_summary(run.result.trace);
    os << "corrections: deviations=" << run.stats.deviations << " tunes=" << run.stats.tunes
       << " redoses=" << run.stats.redoses << " reverts=" << run.stats.reverts
       << " checkpoints=" << run.stats.checkpoints << "\n";
    emit(c.out, os.str());
    if (!c.out.empty()) outputs.push_back(c.out);
    if (!outputs.empty()) cli::write_manifest({"dec-run", in, outputs, c.seed});
    return exit_for(run.result.trace.halt.kind);
}

void add_common(CLI::App* sub, Common& c, bool rules, bool graph) {
    if (rules) sub->add_option("--rules", c.rules, "Rule database (.rules JSON)");
    if (graph) sub->add_option("--graph", c.graph, "Hardware graph JSON (default: built-in lab layout)");
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--out", c.out, "Output file (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chemputer: chemical programs on a vessel-tape machine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cli::kToolVersion));

    Common common;
    std::string program_path;

    auto* parse = app.add_subcommand("parse", "Parse a program and print its canonical form");
    parse->add_option("path", program_path, "Program file, or - for stdin")->required();
    parse->add_option("--out", common.out, "Output file (default: stdout)");

    auto* validate = app.add_subcommand("validate", "Check a program against a hardware graph");
    validate->add_option("path", program_path)->required();
    add_common(validate, common, false, true);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Execute a program; exit status encodes the halt kind");
    run->add_option("path", program_path)->required();
    add_common(run, common, true, true);
    run->add_option("--budget", run_args.budget, "Step budget");
    run->add_option("--trace", run_args.trace, "Write the JSON-lines trace here");
    run->add_flag("--persist-rules", run_args.persist, "Write promoted rules back to --rules");
    run->add_flag("--explore", run_args.explore, "Explore for rules when none matches");
    run->add_option("--latent", run_args.latent, "Rules reachable only by exploration");
    run->add_flag("--compiled", run_args.compiled, "Lower onto the graph before running");

    std::string target, stock, program_out;
    int depth = rules::kDefaultPlanDepth;
    auto* plan = app.add_subcommand("plan", "Plan a pathway to a target species");
    add_common(plan, common, true, false);
    plan->add_option("--target", target)->required();
    plan->add_option("--stock", stock, "Comma-separated stock species");
    plan->add_option("--depth", depth, "Maximum pathway length");
    plan->add_option("--program", program_out, "Also write the pathway as a program");

    auto* compile = app.add_subcommand("compile", "Lower a program onto a hardware graph");
    compile->add_option("path", program_path)->required();
    add_common(compile, common, true, true);

    std::vector<std::string> stat_paths;
    int synthetic = 0;
    int template_ops = 15;
    auto* stats = app.add_subcommand("stats", "Step classification and cumulative-count fit");
    stats->add_option("paths", stat_paths, "Program files");
    stats->add_option("--synthetic", synthetic, "Add synthetic programs with 1..K reaction steps");
    stats->add_option("--template", template_ops, "Ops per reaction step in synthetic programs");
    stats->add_option("--out", common.out, "Output file (default: stdout)");

    std::string mc_config, svg;
    std::optional<std::uint64_t> mc_seed;
    auto* mc = app.add_subcommand("mc", "Monte Carlo of flawless-copy decay");
    mc->add_option("--config", mc_config)->required();
    mc->add_option("--out", common.out, "CSV output (default: stdout)");
    mc->add_option("--svg", svg, "SVG plot output");
    mc->add_option("--seed", mc_seed, "Override the config seed");

    DecArgs dec_args;
    auto* dec_run = app.add_subcommand("dec-run", "Run with dynamic error correction");
    dec_run->add_option("path", program_path)->required();
    add_common(dec_run, common, true, true);
    dec_run->add_option("--policy", dec_args.policy, "Correction policy JSON");
    dec_run->add_option("--inject-eps", dec_args.eps, "Per-transformation failure probability");
    dec_run->add_option("--seeds", dec_args.seeds, "Paired seeds for --compare");
    dec_run->add_flag("--compare", dec_args.compare, "Compare with and without correction");
    dec_run->add_flag("--abstract", dec_args.abstract_only, "Run on the abstract machine instead of the graph");
    dec_run->add_option("--trace", dec_args.trace, "Write the JSON-lines trace here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*parse) return cmd_parse(program_path, common.out);
        if (*validate) return cmd_validate(program_path, common);
        if (*run) return cmd_run(program_path, common, run_args);
        if (*plan) return cmd_plan(common, target, stock, depth, program_out);
        if (*compile) return cmd_compile(program_path, common);
        if (*stats) return cmd_stats(stat_paths, synthetic, template_ops, common.out);
        if (*mc) return cmd_mc(mc_config, common.out, svg, mc_seed);
        if (*dec_run) return cmd_dec_run(program_path, common, dec_args);
    } catch (const chemlang::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const rules::PlanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUnreachable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}
