#include "iupf/cli.hpp"

#include "iupf/errors.hpp"
#include "iupf/sim.hpp"

#include <CLI11/CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace iupf::cli {

namespace {

struct Options {
    std::string scenario;
    std::string out;
    std::optional<long long> seed;
    std::vector<std::string> sets;
    std::optional<int> snapshot_stride;
    std::optional<std::string> mode;
    std::string run_dir;
    std::string key;
    std::vector<std::string> values;
};

std::vector<Override> collect_overrides(const Options& o) {
    std::vector<Override> ovs;
    for (const std::string& s : o.sets) ovs.push_back(parse_override(s));
    if (o.seed) ovs.push_back({"seed", std::to_string(*o.seed)});
    if (o.snapshot_stride) ovs.push_back({"output.snapshot_stride", std::to_string(*o.snapshot_stride)});
    if (o.mode) ovs.push_back({"planner.mode", "\"" + *o.mode + "\""});
    return ovs;
}

void print_safety(const SafetyReport& s, std::ostream& out) {
    out << std::fixed << std::setprecision(3);
    out << "min separation      : ";
    if (std::isfinite(s.min_separation)) {
        out << s.min_separation << " m\n";
    } else {
        out << "n/a (single vehicle)\n";
    }
    out << "time below " << s.warning_threshold << " m : " << s.time_below_warning << " s\n";
    out << "time below " << s.critical_threshold << " m  : " << s.time_below_critical << " s\n";
    out.unsetf(std::ios::floatfield);
}

RunLog run_and_export(const Scenario& sc, const std::filesystem::path& dir, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        RunLog log = run(sc);
        export_run(log, dir);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const StepRecord& last = log.steps.back();
        const VehicleState& host = last.vehicles[sc.host_index()].state;
        out << "run '" << sc.name << "': " << sc.n_steps() << " steps in " << std::setprecision(3) << secs
            << " s -> " << dir.string() << "\n";
        out << "host final: s = " << host.s << " m, d = " << host.d << " m, speed = " << host.s_dot << " m/s\n";
        print_safety(safety_report(log), out);
        return log;
    } catch (const SimulationError& e) {
        export_run(e.partial_log(), dir);
        out << "partial log written to " << dir.string() << "\n";
        e.rethrow_cause();
    }
}

int cmd_run(const Options& o, std::ostream& out) {
    const Scenario sc = load_scenario(o.scenario, collect_overrides(o));
    run_and_export(sc, o.out, out);
    return kSuccess;
}

int cmd_fields(const Options& o, std::ostream& out) {
    const Scenario sc = load_scenario(o.scenario, collect_overrides(o));
    const FieldSnapshot snap = initial_fields(sc);
    const std::filesystem::path dir(o.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_field_csv(snap.benefit, dir / "benefit.csv");
    write_field_csv(snap.risk, dir / "risk.csv");
    write_field_csv(snap.unified, dir / "unified.csv");
    out << "wrote benefit.csv, risk.csv, unified.csv to " << dir.string() << "\n";
    return kSuccess;
}

nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

int cmd_report(const Options& o, std::ostream& out) {
    const std::filesystem::path dir(o.run_dir);
    const nlohmann::json safety = read_json(dir / "safety.json");
    SafetyReport s;
    s.min_separation = safety.at("min_separation_m").is_null() ? std::numeric_limits<double>::infinity()
                                                                : safety.at("min_separation_m").get<double>();
    s.time_below_warning = safety.at("time_below_15m_s").get<double>();
    s.time_below_critical = safety.at("time_below_8m_s").get<double>();
    out << "run directory       : " << dir.string() << "\n";
    out << "steps recorded      : " << safety.value("steps", 0) << "\n";
    print_safety(s, out);

    std::ifstream conv(dir / "convergence.jsonl");
    if (!conv) throw IoError("cannot open " + (dir / "convergence.jsonl").string());
    int solves = 0;
    int converged = 0;
    int lines = 0;
    double last_gap = 0.0;
    double worst_rho = 0.0;
    bool have_rho = false;
    int prev_step = -1;
    bool prev_converged = false;
    std::string line;
    while (std::getline(conv, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("convergence.jsonl: " + std::string(e.what()));
        }
        ++lines;
        const int step = j.at("step").get<int>();
        if (step != prev_step) {
            if (prev_step >= 0 && prev_converged) ++converged;
            ++solves;
            prev_step = step;
        }
        prev_converged = j.at("converged").get<bool>();
        if (!j.at("w2_gap").is_null()) last_gap = j.at("w2_gap").get<double>();
        if (!j.at("rho_hat").is_null()) {
            worst_rho = have_rho ? std::max(worst_rho, j.at("rho_hat").get<double>()) : j.at("rho_hat").get<double>();
            have_rho = true;
        }
    }
    if (prev_step >= 0 && prev_converged) ++converged;
    out << "equilibrium solves  : " << solves << " (" << converged << " reached the W2 tolerance, " << lines
        << " iterations)\n";
    out << "last W2 gap         : " << last_gap << "\n";
    out << "largest rho_hat     : ";
    if (have_rho) {
        out << worst_rho << "\n";
    } else {
        out << "n/a (fewer than 3 iterations per solve)\n";
    }
    return kSuccess;
}

std::string directory_name(const std::string& key, const std::string& value) {
    std::string name = key + "_" + value;
    for (char& c : name) {
        if (c == '/' || c == '\\' || c == ' ' || c == '"') c = '_';
    }
    return name;
}

int cmd_sweep(const Options& o, std::ostream& out) {
    if (o.values.empty()) throw ValidationError("--values needs at least one entry");
    const std::vector<Override> base = collect_overrides(o);
    for (const std::string& v : o.values) {
        std::vector<Override> ovs = base;
        ovs.push_back({o.key, v});
        const Scenario sc = load_scenario(o.scenario, ovs);
        run_and_export(sc, std::filesystem::path(o.out) / directory_name(o.key, v), out);
    }
    return kSuccess;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Interaction-enriched unified potential field planner"};
    app.require_subcommand(1);
    app.footer(schema_help());
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "Scenario TOML file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the scenario seed");
        sub->add_option("--set", o.sets, "Override a schema key, e.g. --set fusion.gamma1=3.3 (repeatable)");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "Simulate a scenario and export the run");
    add_common(run_cmd);
    run_cmd->add_option("--out", o.out, "Output directory")->required();
    run_cmd->add_option("--snapshot-stride", o.snapshot_stride, "Steps between field snapshots");
    run_cmd->add_option("--mode", o.mode, "replan_every_step or plan_once")
        ->check(CLI::IsMember({"replan_every_step", "plan_once"}));

    CLI::App* fields_cmd = app.add_subcommand("fields", "Export benefit, risk and unified fields at t = 0");
    add_common(fields_cmd);
    fields_cmd->add_option("--out", o.out, "Output directory")->required();

    CLI::App* report_cmd = app.add_subcommand("report", "Summarize an exported run");
    report_cmd->add_option("run_dir,--run", o.run_dir, "Run directory")->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a grid over one schema key");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--key", o.key, "Dotted schema key")->required();
    sweep_cmd->add_option("--values", o.values, "Comma-separated values")->required()->delimiter(',');
    sweep_cmd->add_option("--out", o.out, "Parent output directory")->required();
    sweep_cmd->add_option("--snapshot-stride", o.snapshot_stride, "Steps between field snapshots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kValidation;
    }

    try {
        if (*run_cmd) return cmd_run(o, out);
        if (*fields_cmd) return cmd_fields(o, out);
        if (*report_cmd) return cmd_report(o, out);
        if (*sweep_cmd) return cmd_sweep(o, out);
        return kValidation;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const ConvergenceError& e) {
        err << "numerical non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const NonConvergenceError& e) {
        err << "numerical non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const InstabilityError& e) {
        err << "numerical non-convergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace iupf::cli
