#include "glmb/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace glmb::cli {

namespace {

void add_scenario_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--scenario", cfg.scenario, "linear, nonlinear or custom")
        ->check(CLI::IsMember({"linear", "nonlinear", "custom"}))
        ->capture_default_str();
    cmd->add_option("--scenario-file", cfg.scenario_file, "scenario JSON used with --scenario custom");
    cmd->add_option("--clutter-scale", cfg.clutter_scale, "multiplier on the clutter intensity")
        ->capture_default_str();
}

// Expands `run --config FILE` into `--key=value` arguments for every key not already given on the
// command line, so flags take precedence over the file.
std::vector<std::string> expand_run_config(std::vector<std::string> args) {
    if (args.size() < 2 || args[1] != "run") return args;
    std::string path;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    auto given = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.starts_with(flag + "=")) return true;
        return false;
    };
    std::vector<std::string> extra;
    for (const auto& item : CLI::ConfigINI().from_file(path)) {
        const auto flag = "--" + item.name;
        if (given(flag)) continue;
        std::string value;
        for (const auto& in : item.inputs) value += (value.empty() ? "" : ",") + in;
        extra.push_back(flag + "=" + value);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

int assign_command(const std::string& eta_path, int T, const std::string& solver, std::uint64_t seed,
                   const std::string& output) {
    AssociationProblem problem;
    if (eta_path == "-") {
        problem = parse_eta_csv(std::cin);
    } else {
        std::ifstream in(eta_path);
        if (!in) throw UsageError("cannot read " + eta_path);
        problem = parse_eta_csv(in);
    }
    const auto ranked = assign(problem, T, solver, seed);
    if (output.empty()) {
        write_assignments_csv(ranked, problem.P(), std::cout);
    } else {
        std::ofstream out(output, std::ios::binary);
        if (!out) throw UsageError("cannot write " + output);
        write_assignments_csv(ranked, problem.P(), out);
    }
    return kExitOk;
}

}  // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"GLMB multi-object tracker: scenario runs, scaling benchmarks and ranked assignment"};
    app.require_subcommand(1);

    RunConfig run_cfg;
    auto* run_cmd = app.add_subcommand("run", "simulate a scenario and run the filter over Monte Carlo trials");
    std::string config_path;
    run_cmd->add_option("--config", config_path, "key = value configuration file; command-line flags take precedence");
    add_scenario_options(run_cmd, run_cfg);
    run_cmd->add_option("--solver", run_cfg.solver, "gibbs or murty")
        ->check(CLI::IsMember({"gibbs", "murty"}))
        ->capture_default_str();
    run_cmd->add_option("--h-max", run_cfg.h_max, "component cap per scan")->capture_default_str();
    run_cmd->add_option("--mc", run_cfg.mc_trials, "Monte Carlo trials")->capture_default_str();
    run_cmd->add_option("--seed", run_cfg.seed, "base seed")->capture_default_str();
    run_cmd->add_option("--output-dir", run_cfg.output_dir, "output directory")->capture_default_str();
    run_cmd->add_option("--backend", run_cfg.backend, "gm or smc (default: gm for linear, smc otherwise)")
        ->check(CLI::IsMember({"gm", "smc"}));
    run_cmd->add_option("--particles", run_cfg.particles, "particles per track (smc)")->capture_default_str();
    run_cmd->add_option("--jobs", run_cfg.jobs, "concurrent trials")->capture_default_str();
    run_cmd->add_flag("--no-tempering", run_cfg.no_tempering, "sample with the untempered model");
    run_cmd->add_flag("--dump-density", run_cfg.dump_density, "write the final GLMB density as JSON");
    run_cmd->add_option("--ospa-cutoff", run_cfg.ospa_cutoff, "OSPA cutoff c (m)")->capture_default_str();
    run_cmd->add_option("--ospa-order", run_cfg.ospa_order, "OSPA order p")->capture_default_str();

    BenchConfig bench_cfg;
    std::string bench_out;
    auto* bench_cmd = app.add_subcommand("bench", "time Gibbs and Murty on synthetic association problems");
    bench_cmd->add_option("--p-values", bench_cfg.p_values, "P sweep")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--m-values", bench_cfg.m_values, "M sweep")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--fixed-p", bench_cfg.fixed_p, "P during the M sweep")->capture_default_str();
    bench_cmd->add_option("--fixed-m", bench_cfg.fixed_m, "M during the P sweep")->capture_default_str();
    bench_cmd->add_option("--samples", bench_cfg.gibbs_samples, "Gibbs samples per sweep point")->capture_default_str();
    bench_cmd->add_option("--murty-solutions", bench_cfg.murty_solutions, "Murty solutions per sweep point")
        ->capture_default_str();
    bench_cmd->add_option("--repeats", bench_cfg.repeats, "timing repeats (best kept)")->capture_default_str();
    bench_cmd->add_option("--seed", bench_cfg.seed, "problem seed")->capture_default_str();
    bench_cmd->add_option("--compare-p", bench_cfg.compare_p, "P of the equal-T comparison")->capture_default_str();
    bench_cmd->add_option("--compare-m", bench_cfg.compare_m, "M of the equal-T comparison")->capture_default_str();
    bench_cmd->add_option("--compare-samples", bench_cfg.compare_samples, "T of the equal-T comparison")
        ->capture_default_str();
    bool no_murty_sweep = false;
    bench_cmd->add_flag("--no-murty-sweep", no_murty_sweep, "time Murty only at the comparison point");
    bench_cmd->add_option("--output", bench_out, "also write the report as JSON");

    std::string eta_path, assign_solver = "murty", assign_out;
    int assign_T = 10;
    std::uint64_t assign_seed = 1;
    auto* assign_cmd = app.add_subcommand("assign", "ranked assignments for an η table given as CSV");
    assign_cmd->add_option("--eta", eta_path, "CSV with P rows and M + 2 columns (j = -1, 0, 1..M); - for stdin")
        ->required();
    assign_cmd->add_option("-T", assign_T, "number of assignments (Gibbs: chain length)")->capture_default_str();
    assign_cmd->add_option("--solver", assign_solver, "gibbs or murty")
        ->check(CLI::IsMember({"gibbs", "murty"}))
        ->capture_default_str();
    assign_cmd->add_option("--seed", assign_seed, "Gibbs seed")->capture_default_str();
    assign_cmd->add_option("--output", assign_out, "output CSV (default stdout)");

    RunConfig sim_cfg;
    std::string sim_out = "glmb_sim";
    std::uint64_t sim_seed = 1;
    auto* sim_cmd = app.add_subcommand("simulate", "write truth.csv and measurements.csv for one seed");
    add_scenario_options(sim_cmd, sim_cfg);
    sim_cmd->add_option("--seed", sim_seed, "simulation seed")->capture_default_str();
    sim_cmd->add_option("--output-dir", sim_out, "output directory")->capture_default_str();

    RunConfig export_cfg;
    std::string export_out;
    auto* export_cmd = app.add_subcommand("scenario", "print a built-in scenario as JSON (the custom format)");
    add_scenario_options(export_cmd, export_cfg);
    export_cmd->add_option("-o,--output", export_out, "output file (default stdout)");

    try {
        auto args = expand_run_config(std::vector<std::string>(argv, argv + argc));
        std::vector<char*> ptrs;
        for (auto& a : args) ptrs.push_back(a.data());
        app.parse(static_cast<int>(ptrs.size()), ptrs.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run_cmd) return run(run_cfg, std::cerr);
        if (*bench_cmd) {
            bench_cfg.sweep_murty = !no_murty_sweep;
            const auto report = bench_scaling(bench_cfg);
            print_bench(report, std::cout);
            if (!bench_out.empty()) {
                std::ofstream out(bench_out, std::ios::binary);
                if (!out) throw UsageError("cannot write " + bench_out);
                out << bench_to_json(report);
            }
            return kExitOk;
        }
        if (*assign_cmd) return assign_command(eta_path, assign_T, assign_solver, assign_seed, assign_out);
        if (*sim_cmd) {
            const auto spec = load_scenario(sim_cfg);
            write_simulation(spec, simulate(spec, sim_seed), sim_out);
            return kExitOk;
        }
        if (*export_cmd) {
            const auto text = scenario_to_json(load_scenario(export_cfg));
            if (export_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(export_out, std::ios::binary);
                if (!out) throw UsageError("cannot write " + export_out);
                out << text;
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace glmb::cli
