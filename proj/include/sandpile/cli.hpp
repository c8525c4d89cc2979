#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sandpile/experiments.hpp"
#include "sandpile/io.hpp"

namespace sandpile {

struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// A fully-defaulted description of one command invocation; round-trips
// through its argv form via render()/parse_args().
struct RunSpec {
    enum class Command { stabilize, sweep, verify, replay };
    Command command = Command::stabilize;
    std::int64_t n = 1000;
    std::vector<std::int64_t> n_list;  // overrides per-suite defaults when set
    std::int64_t ground = 2;
    int dim = 2;
    Strategy strategy = Strategy::bulk_fifo();
    std::int64_t budget = kDefaultBudget;
    std::uint64_t seed = 1;
    double epsilon = 0.1;
    std::int64_t rmax = 30;
    std::int64_t r1 = 1;
    std::int64_t r2 = 1;
    int trials = 5;
    std::string suite;         // verify only
    std::string out_pgm;       // --out
    std::string out_odometer;  // --odometer
    std::string out_csv;       // --csv

    friend bool operator==(const RunSpec& a, const RunSpec& b) {
        return a.command == b.command && a.n == b.n && a.n_list == b.n_list &&
               a.ground == b.ground && a.dim == b.dim && a.strategy.kind == b.strategy.kind &&
               a.strategy.seed == b.strategy.seed && a.budget == b.budget && a.seed == b.seed &&
               a.epsilon == b.epsilon && a.rmax == b.rmax && a.r1 == b.r1 && a.r2 == b.r2 &&
               a.trials == b.trials && a.suite == b.suite && a.out_pgm == b.out_pgm &&
               a.out_odometer == b.out_odometer && a.out_csv == b.out_csv;
    }
};

namespace detail {

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {
        "abelian",        "monotonic", "lemma1",          "lemma2",  "lemma2-stages",
        "theorem1-square", "theorem2",  "theorem2-stages", "scaling"};
    return names;
}

inline std::string command_name(RunSpec::Command c) {
    switch (c) {
        case RunSpec::Command::stabilize: return "stabilize";
        case RunSpec::Command::sweep: return "sweep";
        case RunSpec::Command::verify: return "verify";
        case RunSpec::Command::replay: return "replay";
    }
    return "?";
}

}  // namespace detail

/// Counts accept plain integers or scientific notation with an integral
/// value: "1000", "1e3", "2.5e5".
inline std::int64_t parse_count(const std::string& s) {
    try {
        std::size_t pos = 0;
        if (s.find_first_of("eE.") != std::string::npos) {
            long double v = std::stold(s, &pos);
            if (pos != s.size() || v < 0 || v > 9.0e18L || v != std::floor(v))
                throw usage_error("not a non-negative integral count: " + s);
            return static_cast<std::int64_t>(v);
        }
        long long v = std::stoll(s, &pos);
        if (pos != s.size() || v < 0) throw usage_error("not a non-negative count: " + s);
        return v;
    } catch (const usage_error&) {
        throw;
    } catch (const std::exception&) {
        throw usage_error("not a count: " + s);
    }
}

inline std::vector<std::int64_t> parse_count_list(const std::string& s) {
    std::vector<std::int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw usage_error("empty entry in count list: " + s);
        out.push_back(parse_count(item));
    }
    if (out.empty()) throw usage_error("empty count list");
    return out;
}

inline Strategy strategy_from_name(const std::string& name, std::uint64_t seed) {
    if (name == "fifo") return Strategy::fifo();
    if (name == "lifo") return Strategy::lifo();
    if (name == "random") return Strategy::random(seed);
    if (name == "bulk-fifo") return Strategy::bulk_fifo();
    if (name == "tiled-parallel") return Strategy::tiled_parallel();
    throw usage_error("unknown strategy: " + name);
}

/// Parse a command line (without the program name) into a validated RunSpec.
/// Unknown flags, missing subcommands and malformed values all throw
/// usage_error (exit code 2).
inline RunSpec parse_args(const std::vector<std::string>& args) {
    RunSpec spec;
    std::string n_str, n_list_str, budget_str, strategy_str, suite_str;

    CLI::App app{"abelian sandpile stabilization and verification"};
    app.require_subcommand(1);
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--n", n_str, "particle count (accepts 1e6 style; lists for sweep)");
        sub->add_option("--n-list", n_list_str, "comma-separated particle counts");
        sub->add_option("--ground", spec.ground, "background height h")->check(CLI::NonNegativeNumber);
        sub->add_option("--dim", spec.dim, "lattice dimension d")->check(CLI::Range(1, kMaxDim));
        sub->add_option("--strategy", strategy_str,
                        "fifo | lifo | random | bulk-fifo | tiled-parallel");
        sub->add_option("--budget", budget_str, "max topplings before aborting");
        sub->add_option("--seed", spec.seed, "seed for random strategies and corpora");
        sub->add_option("--epsilon", spec.epsilon, "slack for (1+epsilon) bounds")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--rmax", spec.rmax, "largest square radius for lemma sweeps")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--r1", spec.r1, "inner square radius")->check(CLI::NonNegativeNumber);
        sub->add_option("--r2", spec.r2, "outer square radius")->check(CLI::NonNegativeNumber);
        sub->add_option("--trials", spec.trials, "random trials in property suites")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--out", spec.out_pgm, "write final configuration PGM here");
        sub->add_option("--odometer", spec.out_odometer, "write odometer CSV here");
        sub->add_option("--csv", spec.out_csv, "write sweep CSV here");
    };
    CLI::App* cmd_stabilize = app.add_subcommand("stabilize", "stabilize one point source");
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "scaling sweep over an n list");
    CLI::App* cmd_verify = app.add_subcommand("verify", "run a verification suite");
    CLI::App* cmd_replay = app.add_subcommand("replay", "replay the staged square schedule");
    for (CLI::App* sub : {cmd_stabilize, cmd_sweep, cmd_verify, cmd_replay}) add_common(sub);
    cmd_verify->add_option("--suite", suite_str, "which verification suite to run");

    std::vector<const char*> argv;
    argv.push_back("sandpile");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::flush;
        throw;  // handled by cli_main as success
    } catch (const CLI::ParseError& e) {
        throw usage_error(e.what());
    }

    if (cmd_stabilize->parsed()) spec.command = RunSpec::Command::stabilize;
    if (cmd_sweep->parsed()) spec.command = RunSpec::Command::sweep;
    if (cmd_verify->parsed()) spec.command = RunSpec::Command::verify;
    if (cmd_replay->parsed()) spec.command = RunSpec::Command::replay;

    if (!n_str.empty()) {
        std::vector<std::int64_t> vs = parse_count_list(n_str);
        if (vs.size() == 1) {
            spec.n = vs[0];
        } else {
            spec.n_list = vs;  // `--n 1e3,1e4,...` is list shorthand
        }
    }
    if (!n_list_str.empty()) spec.n_list = parse_count_list(n_list_str);
    if (!budget_str.empty()) spec.budget = parse_count(budget_str);
    if (!strategy_str.empty()) spec.strategy = strategy_from_name(strategy_str, spec.seed);
    if (spec.strategy.kind == Strategy::Kind::random) spec.strategy.seed = spec.seed;

    if (spec.command == RunSpec::Command::verify) {
        if (suite_str.empty()) throw usage_error("verify needs --suite");
        const auto& names = detail::suite_names();
        if (std::find(names.begin(), names.end(), suite_str) == names.end())
            throw usage_error("unknown suite: " + suite_str);
        spec.suite = suite_str;
    }
    if (spec.r1 > spec.r2) throw usage_error("--r1 must not exceed --r2");
    for (std::size_t i = 1; i < spec.n_list.size(); ++i)
        if (spec.n_list[i] <= spec.n_list[i - 1])
            throw usage_error("--n-list must be strictly increasing");
    return spec;
}

/// Canonical argv form; parse_args(render(spec)) == spec for valid specs.
inline std::vector<std::string> render(const RunSpec& spec) {
    std::vector<std::string> out;
    out.push_back(detail::command_name(spec.command));
    auto add = [&out](const std::string& flag, const std::string& v) {
        out.push_back(flag);
        out.push_back(v);
    };
    add("--n", std::to_string(spec.n));
    if (!spec.n_list.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < spec.n_list.size(); ++i)
            joined += (i ? "," : "") + std::to_string(spec.n_list[i]);
        add("--n-list", joined);
    }
    add("--ground", std::to_string(spec.ground));
    add("--dim", std::to_string(spec.dim));
    add("--strategy", spec.strategy.name());
    add("--budget", std::to_string(spec.budget));
    add("--seed", std::to_string(spec.seed));
    {
        std::ostringstream os;
        os.precision(17);
        os << spec.epsilon;
        add("--epsilon", os.str());
    }
    add("--rmax", std::to_string(spec.rmax));
    add("--r1", std::to_string(spec.r1));
    add("--r2", std::to_string(spec.r2));
    add("--trials", std::to_string(spec.trials));
    if (!spec.suite.empty()) add("--suite", spec.suite);
    if (!spec.out_pgm.empty()) add("--out", spec.out_pgm);
    if (!spec.out_odometer.empty()) add("--odometer", spec.out_odometer);
    if (!spec.out_csv.empty()) add("--csv", spec.out_csv);
    return out;
}

namespace detail {

inline nlohmann::json record_json(const SweepRecord& r) {
    nlohmann::json j{{"n", r.n},
                     {"h", r.h},
                     {"d", r.d},
                     {"radius", r.cluster_radius},
                     {"diamond_radius", r.diamond_radius},
                     {"total_topplings", r.total_topplings},
                     {"wall_time_s", r.wall_time_s}};
    if (r.square_r)
        j["square_r"] = *r.square_r;
    else
        j["square_r"] = nullptr;
    return j;
}

inline std::vector<std::int64_t> suite_n_default(const RunSpec& spec) {
    if (!spec.n_list.empty()) return spec.n_list;
    if (spec.suite == "theorem1-square") return {4, 10, 100, 1000, 10000, 100000};
    if (spec.suite == "theorem2") return {10000, 100000, 1000000};
    if (spec.suite == "theorem2-stages") return {1000, 10000};
    if (spec.suite == "lemma1") return {10000};
    if (spec.suite == "scaling")
        return spec.dim == 2
                   ? std::vector<std::int64_t>{1000, 3162, 10000, 31623, 100000, 316228, 1000000}
                   : std::vector<std::int64_t>{1000, 3162, 10000, 31623, 100000};
    return {spec.n};
}

inline int run_stabilize(const RunSpec& spec, nlohmann::json& out) {
    auto t0 = std::chrono::steady_clock::now();
    StabilizationResult res =
        stabilize_point_source(spec.n, spec.ground, spec.dim, spec.strategy, spec.budget);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Cluster t = toppled_cluster(res);
    auto sq = match_square(t);
    out["n"] = spec.n;
    out["ground"] = spec.ground;
    out["dim"] = spec.dim;
    out["strategy"] = spec.strategy.name();
    out["budget"] = spec.budget;
    out["budget_exhausted"] = res.budget_exhausted;
    out["total_topplings"] = res.total_topplings;
    out["radius"] = radius(t);
    out["diamond_radius"] = largest_contained_diamond(t);
    out["square_r"] = sq ? nlohmann::json(*sq) : nlohmann::json(nullptr);
    out["wall_time_s"] = dt;
    if (!spec.out_pgm.empty()) {
        if (spec.dim != 2) throw usage_error("--out PGM requires --dim 2");
        emit_final_pgm(res, spec.out_pgm);
        out["pgm"] = spec.out_pgm;
    }
    if (!spec.out_odometer.empty()) {
        emit_odometer_csv(res.odometer, spec.out_odometer);
        out["odometer_csv"] = spec.out_odometer;
    }
    return res.budget_exhausted ? 4 : 0;
}

inline int run_sweep(const RunSpec& spec, nlohmann::json& out) {
    std::vector<std::int64_t> ns = !spec.n_list.empty()
                                       ? spec.n_list
                                       : std::vector<std::int64_t>{1000, 10000, 100000};
    SweepResult sr = sweep(ns, spec.ground, spec.dim, spec.budget);
    out["records"] = nlohmann::json::array();
    for (const auto& r : sr.records) out["records"].push_back(record_json(r));
    out["fit"] = {{"c", sr.fit.c},
                  {"alpha", sr.fit.alpha},
                  {"n_min_used", sr.fit.n_min_used},
                  {"points", sr.fit.points}};
    if (!spec.out_csv.empty()) {
        emit_sweep_csv(sr.records, spec.out_csv);
        out["csv"] = spec.out_csv;
    }
    return 0;
}

inline int run_verify(const RunSpec& spec, nlohmann::json& out) {
    out["suite"] = spec.suite;
    nlohmann::json checks = nlohmann::json::array();
    bool pass = true;
    auto note = [&](const std::string& name, bool ok, nlohmann::json detail = {}) {
        detail["check"] = name;
        detail["pass"] = ok;
        checks.push_back(detail);
        pass = pass && ok;
    };

    if (spec.suite == "abelian") {
        int trials = std::max(spec.trials, 1);
        for (int i = 0; i < 20; ++i) {
            AbelianReport rep = abelian_check(random_config(spec.seed + static_cast<std::uint64_t>(i)),
                                              trials, spec.seed + 1000 + static_cast<std::uint64_t>(i),
                                              spec.budget);
            note("random config " + std::to_string(i), rep.pass, {{"failure", rep.failure}});
        }
        for (std::int64_t n : {4, 100, 1000})
            for (std::int64_t h : {0, 2}) {
                AbelianReport rep = abelian_check(make_point_source(n, h, 2), trials,
                                                  spec.seed + 77, spec.budget);
                note("point source n=" + std::to_string(n) + " h=" + std::to_string(h), rep.pass,
                     {{"failure", rep.failure}});
            }
    } else if (spec.suite == "monotonic") {
        int pairs = std::max(spec.trials, 1);
        for (int i = 0; i < pairs; ++i) {
            SandpileConfig a = random_config(spec.seed + static_cast<std::uint64_t>(i));
            SandpileConfig b = random_bump(a, spec.seed + 5000 + static_cast<std::uint64_t>(i));
            MonotonicityReport rep = monotonicity_check(a, b, spec.budget);
            note("random pair " + std::to_string(i), rep.pass,
                 {{"odometer_leq", rep.odometer_leq}});
        }
        MonotonicityReport rep = monotonicity_check(make_point_source(spec.n, spec.ground, 2),
                                                    make_point_source(spec.n + 1, spec.ground, 2),
                                                    spec.budget);
        note("point source n vs n+1", rep.pass, {{"odometer_leq", rep.odometer_leq}});
    } else if (spec.suite == "lemma1") {
        for (std::int64_t n : suite_n_default(spec)) {
            Lemma1Report rep = lemma1_check(n, spec.epsilon, spec.budget);
            note("n=" + std::to_string(n), rep.pass,
                 {{"radius", rep.radius},
                  {"zero_pairs", rep.zero_pairs},
                  {"occupied_dominoes", rep.occupied_dominoes},
                  {"diamond_radius", rep.diamond_radius}});
        }
    } else if (spec.suite == "lemma2") {
        for (std::int64_t r2 = 0; r2 <= spec.rmax; ++r2)
            for (std::int64_t r1 = 0; r1 <= r2; ++r1) {
                Lemma2Report rep = lemma2_check(r1, r2, spec.budget);
                if (!rep.pass)
                    note("r1=" + std::to_string(r1) + " r2=" + std::to_string(r2), false,
                         {{"radius", rep.radius}, {"bound", rep.bound}});
            }
        note("all pairs r1 <= r2 <= " + std::to_string(spec.rmax), pass);
    } else if (spec.suite == "lemma2-stages") {
        std::int64_t cap = std::min<std::int64_t>(spec.rmax, 30);
        for (std::int64_t r2 = 1; r2 <= cap; ++r2)
            for (std::int64_t r1 = 1; r1 <= r2; ++r1) {
                Lemma2StageReport rep = lemma2_stage_check(r1, r2);
                if (!rep.pass)
                    note("r1=" + std::to_string(r1) + " r2=" + std::to_string(r2), false,
                         {{"legal", rep.legal},
                          {"interior_ok", rep.interior_ok},
                          {"final_ok", rep.final_ok},
                          {"containment_ok", rep.containment_ok}});
            }
        note("all stage pairs r1 <= r2 <= " + std::to_string(cap), pass);
    } else if (spec.suite == "theorem1-square") {
        for (std::int64_t n : suite_n_default(spec)) {
            SweepRecord rec = run_point_source(n, 2, 2, Strategy::bulk_fifo(), spec.budget);
            note("n=" + std::to_string(n), rec.square_r.has_value(),
                 {{"radius", rec.cluster_radius}});
        }
    } else if (spec.suite == "theorem2") {
        for (std::int64_t n : suite_n_default(spec)) {
            SweepRecord rec = run_point_source(n, 2, 2, Strategy::bulk_fifo(), spec.budget);
            double root = std::sqrt(static_cast<double>(n));
            bool lower = root <= static_cast<double>(rec.cluster_radius);
            bool upper =
                static_cast<double>(rec.cluster_radius) <= 4.0 * (1.0 + spec.epsilon) * root;
            note("n=" + std::to_string(n), lower && upper,
                 {{"radius", rec.cluster_radius},
                  {"sqrt_n", root},
                  {"lower_ok", lower},
                  {"upper_ok", upper}});
        }
    } else if (spec.suite == "theorem2-stages") {
        for (std::int64_t n : suite_n_default(spec)) {
            StageTrace tr = theorem2_stages(n, spec.epsilon, spec.budget);
            note("n=" + std::to_string(n), tr.pass,
                 {{"r1", tr.stages[0].radius},
                  {"r2", tr.stages[1].radius},
                  {"r3", tr.stages[2].radius},
                  {"final_equal", tr.final_equal}});
        }
    } else if (spec.suite == "scaling") {
        SweepResult sr = sweep(suite_n_default(spec), spec.ground, spec.dim, spec.budget);
        double lo = 1.0 / spec.dim - 0.04, hi = 1.0 / spec.dim + 0.04;
        bool ok = sr.fit.alpha >= lo && sr.fit.alpha <= hi;
        note("alpha in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", ok,
             {{"alpha", sr.fit.alpha}, {"c", sr.fit.c}, {"points", sr.fit.points}});
        if (!spec.out_csv.empty()) {
            emit_sweep_csv(sr.records, spec.out_csv);
            out["csv"] = spec.out_csv;
        }
    }

    out["checks"] = checks;
    out["pass"] = pass;
    return pass ? 0 : 1;
}

inline int run_replay(const RunSpec& spec, nlohmann::json& out) {
    if (spec.r1 < 1) throw usage_error("replay needs --r1 >= 1");
    Lemma2StageReport rep = lemma2_stage_check(spec.r1, spec.r2);
    out["r1"] = spec.r1;
    out["r2"] = spec.r2;
    out["legal"] = rep.legal;
    out["interior_ok"] = rep.interior_ok;
    out["final_ok"] = rep.final_ok;
    out["containment_ok"] = rep.containment_ok;
    out["frame_notes"] = rep.frame_notes;
    out["pass"] = rep.pass;
    return rep.pass ? 0 : 1;
}

}  // namespace detail

/// Execute a spec; prints a JSON summary to stdout and returns the exit code
/// (0 ok / 1 verification failure / 2 usage / 3 I/O / 4 budget exhausted).
inline int run(const RunSpec& spec) {
    nlohmann::json out;
    out["command"] = detail::command_name(spec.command);
    int code = 0;
    switch (spec.command) {
        case RunSpec::Command::stabilize: code = detail::run_stabilize(spec, out); break;
        case RunSpec::Command::sweep: code = detail::run_sweep(spec, out); break;
        case RunSpec::Command::verify: code = detail::run_verify(spec, out); break;
        case RunSpec::Command::replay: code = detail::run_replay(spec, out); break;
    }
    out["exit_code"] = code;
    std::cout << out.dump(2) << std::endl;
    return code;
}

/// Top-level entry point used by the binary: parse, run, map errors to the
/// exit-code contract.
inline int cli_main(int argc, char** argv) {
    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        return run(parse_args(args));
    } catch (const CLI::CallForHelp&) {
        return 0;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const budget_exhausted_error& e) {
        std::cerr << "budget exhausted: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sandpile
