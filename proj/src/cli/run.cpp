#include "glmb/cli.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace glmb::cli {

namespace {

using json = nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
}

std::vector<Eigen::VectorXd> positions(const std::vector<Eigen::VectorXd>& states) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : states) out.emplace_back(position_of(s));
    return out;
}

std::string trial_dir_name(int trial) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "trial_%03d", trial);
    return buf;
}

std::string backend_name(Backend b) {
    return b == Backend::gm ? "gm" : "smc";
}

json diagnostics_json(const StepDiagnostics& d) {
    return {{"scan", d.scan},
            {"parents", d.parents},
            {"children", d.children},
            {"measurements", d.measurements},
            {"max_rows", d.max_rows},
            {"solver_seconds", d.solver_seconds},
            {"weight_ess", d.weight_ess},
            {"log_captured_mass", d.log_captured_mass},
            {"degenerate", d.degenerate}};
}

}  // namespace

ScenarioSpec load_scenario(const RunConfig& config) {
    ScenarioSpec spec;
    if (config.scenario == "linear") {
        spec = linear_scenario();
    } else if (config.scenario == "nonlinear") {
        spec = nonlinear_scenario();
    } else if (config.scenario == "custom") {
        if (config.scenario_file.empty()) throw UsageError("--scenario custom needs --scenario-file");
        try {
            spec = scenario_from_json(read_file(config.scenario_file));
        } catch (const std::invalid_argument& e) {
            throw UsageError(config.scenario_file + ": " + e.what());
        }
    } else {
        throw UsageError("unknown scenario '" + config.scenario + "'");
    }
    if (!(config.clutter_scale > 0.0)) throw UsageError("--clutter-scale must be positive");
    spec.scale_clutter(config.clutter_scale);
    return spec;
}

FilterConfig filter_config(const RunConfig& config, const ScenarioSpec& spec) {
    if (config.h_max < 1) throw UsageError("--h-max must be at least 1");
    if (config.mc_trials < 1) throw UsageError("--mc must be at least 1");
    if (config.jobs < 1) throw UsageError("--jobs must be at least 1");
    if (!(config.ospa_cutoff > 0.0) || !(config.ospa_order >= 1.0))
        throw UsageError("OSPA needs cutoff > 0 and order >= 1");
    FilterConfig fc;
    fc.h_max = config.h_max;
    if (config.solver == "gibbs") {
        fc.solver = Solver::gibbs;
    } else if (config.solver == "murty") {
        fc.solver = Solver::murty;
    } else {
        throw UsageError("unknown solver '" + config.solver + "'");
    }
    const bool linear = std::holds_alternative<LinearParams>(spec.params);
    const std::string backend = config.backend.empty() ? (linear ? "gm" : "smc") : config.backend;
    if (backend == "gm") {
        if (!linear) throw UsageError("the gm backend needs a linear-Gaussian scenario");
        fc.backend.backend = Backend::gm;
    } else if (backend == "smc") {
        fc.backend.backend = Backend::smc;
    } else {
        throw UsageError("unknown backend '" + backend + "'");
    }
    if (config.particles < 100) throw UsageError("--particles must be at least 100");
    fc.backend.smc.particles_per_track = config.particles;
    if (!config.no_tempering) fc.tempering = spec.tempering;
    try {
        fc.validate();
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
    return fc;
}

std::string density_to_json(const GlmbDensity& density) {
    json comps = json::array();
    for (const auto& c : density.components) {
        json labels = json::array();
        json means = json::array();
        for (std::size_t i = 0; i < c.labels.size(); ++i) {
            labels.push_back({c.labels[i].birth_time, c.labels[i].index});
            const Eigen::VectorXd m = density_mean(c.tracks[i]->density);
            means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
        }
        comps.push_back({{"labels", labels}, {"log_weight", c.log_weight}, {"means", means}});
    }
    json doc{{"schema_version", kSchemaVersion}, {"scan", density.scan_time}, {"components", comps}};
    return doc.dump(1) + "\n";
}

TrialResult run_trial(const ScenarioSpec& spec, const RunConfig& config, int trial, const std::filesystem::path& dir) {
    TrialResult res;
    res.trial = trial;
    res.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(trial)});
    FilterConfig fc = filter_config(config, spec);
    fc.rng_seed = derive_seed(res.seed, {1});
    const OspaParams op{config.ospa_cutoff, config.ospa_order};
    const auto start = std::chrono::steady_clock::now();
    std::vector<StepDiagnostics> diags;
    GlmbDensity density = GlmbDensity::empty_set(0);
    Simulation sim;
    try {
        sim = simulate(spec, derive_seed(res.seed, {0}));
        const Models models = spec.build_models();
        res.truth = sim.truth;
        for (int k = 1; k <= spec.duration; ++k) {
            StepDiagnostics d;
            density = joint_step(density, sim.measurements[static_cast<std::size_t>(k - 1)], models, fc, &d);
            diags.push_back(d);
            auto est = estimate_state(density);
            std::vector<Eigen::VectorXd> est_states;
            for (const auto& e : est) est_states.push_back(e.state);
            std::vector<Eigen::VectorXd> truth_states;
            for (const auto& t : sim.truth[static_cast<std::size_t>(k - 1)]) truth_states.push_back(t.state);
            const auto o = ospa(positions(truth_states), positions(est_states), op);
            res.ospa.push_back(o.total);
            res.ospa_localization.push_back(o.localization);
            res.ospa_cardinality.push_back(o.cardinality);
            res.true_n.push_back(static_cast<int>(truth_states.size()));
            res.estimated_n.push_back(static_cast<int>(est.size()));
            res.solver_seconds.push_back(d.solver_seconds);
            res.estimates.push_back(std::move(est));
        }
        res.ok = true;
    } catch (const std::exception& e) {
        res.error = e.what();
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (dir.empty() || !res.ok) return res;

    std::filesystem::create_directories(dir);
    write_simulation(spec, sim, dir);
    {
        auto out = open_out(dir / "tracks.csv");
        write_header(out, tracks_columns(spec));
        for (std::size_t k = 0; k < res.estimates.size(); ++k)
            for (const auto& e : res.estimates[k]) {
                out << k + 1 << ',' << e.label.birth_time << ',' << e.label.index;
                for (Eigen::Index d = 0; d < e.state.size(); ++d) out << ',' << fmt(e.state[d]);
                out << '\n';
            }
    }
    {
        auto out = open_out(dir / "ospa.csv");
        write_header(out, ospa_columns());
        for (std::size_t k = 0; k < res.ospa.size(); ++k)
            out << k + 1 << ',' << fmt(res.ospa[k]) << ',' << fmt(res.ospa_localization[k]) << ','
                << fmt(res.ospa_cardinality[k]) << '\n';
    }
    {
        auto out = open_out(dir / "cardinality.csv");
        write_header(out, cardinality_columns());
        for (std::size_t k = 0; k < res.true_n.size(); ++k)
            out << k + 1 << ',' << res.true_n[k] << ',' << res.estimated_n[k] << '\n';
    }
    {
        double total = 0.0;
        for (double s : res.solver_seconds) total += s;
        json doc{{"schema_version", kSchemaVersion},
                 {"solver_seconds", res.solver_seconds},
                 {"total_solver_seconds", total},
                 {"wall_seconds", res.wall_seconds}};
        open_out(dir / "timing.json") << doc.dump(1) << '\n';
    }
    {
        auto out = open_out(dir / "diagnostics.jsonl");
        for (const auto& d : diags) out << diagnostics_json(d).dump() << '\n';
    }
    if (config.dump_density) open_out(dir / "density.json") << density_to_json(density);
    return res;
}

int run(const RunConfig& config, std::ostream& log) {
    const ScenarioSpec spec = load_scenario(config);
    const FilterConfig fc = filter_config(config, spec);
    const std::filesystem::path root(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec || !std::filesystem::is_directory(root)) throw UsageError("output directory not writable: " + root.string());

    std::vector<TrialResult> results(static_cast<std::size_t>(config.mc_trials));
    std::atomic<int> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (int t = next++; t < config.mc_trials; t = next++) {
            auto r = run_trial(spec, config, t, root / trial_dir_name(t));
            {
                std::lock_guard lock(log_mutex);
                log << "trial " << t << (r.ok ? " ok" : " FAILED: " + r.error) << " (" << fmt(r.wall_seconds)
                    << " s)\n";
            }
            results[static_cast<std::size_t>(t)] = std::move(r);
        }
    };
    const int jobs = std::min(config.jobs, config.mc_trials);
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    const auto K = static_cast<std::size_t>(spec.duration);
    std::vector<double> mean_ospa(K, 0.0), mean_loc(K, 0.0), mean_card(K, 0.0), mean_est(K, 0.0);
    std::vector<int> true_n(K, 0);
    json trials = json::array();
    json failed = json::array();
    int ok = 0;
    double card_err = 0.0, solver_total = 0.0, wall_total = 0.0;
    for (const auto& r : results) {
        if (!r.ok) {
            failed.push_back({{"trial", r.trial}, {"seed", r.seed}, {"error", r.error}});
            continue;
        }
        ++ok;
        double solver = 0.0, avg = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            mean_ospa[k] += r.ospa[k];
            mean_loc[k] += r.ospa_localization[k];
            mean_card[k] += r.ospa_cardinality[k];
            mean_est[k] += r.estimated_n[k];
            true_n[k] = r.true_n[k];
            card_err += std::abs(r.estimated_n[k] - r.true_n[k]);
            solver += r.solver_seconds[k];
            avg += r.ospa[k];
        }
        solver_total += solver;
        wall_total += r.wall_seconds;
        trials.push_back({{"trial", r.trial},
                          {"seed", r.seed},
                          {"dir", trial_dir_name(r.trial)},
                          {"time_average_ospa", avg / static_cast<double>(K)},
                          {"solver_seconds", solver},
                          {"wall_seconds", r.wall_seconds}});
    }
    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["scenario"] = spec.name;
    summary["solver"] = config.solver;
    summary["backend"] = backend_name(fc.backend.backend);
    summary["h_max"] = config.h_max;
    summary["mc_trials"] = config.mc_trials;
    summary["seed"] = config.seed;
    summary["particles"] = config.particles;
    summary["clutter_scale"] = config.clutter_scale;
    summary["tempering"] = {{"birth", fc.tempering.birth},
                            {"survival", fc.tempering.survival},
                            {"detection", fc.tempering.detection}};
    summary["ospa_params"] = {{"cutoff", config.ospa_cutoff}, {"order", config.ospa_order}};
    summary["schemas"] = {{"tracks.csv", tracks_columns(spec)},
                          {"ospa.csv", ospa_columns()},
                          {"cardinality.csv", cardinality_columns()},
                          {"truth.csv", truth_columns(spec)},
                          {"measurements.csv", measurement_columns(spec)}};
    summary["trials"] = trials;
    summary["failed_trials"] = failed;
    if (ok > 0) {
        const double n = ok;
        double avg = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            mean_ospa[k] /= n;
            mean_loc[k] /= n;
            mean_card[k] /= n;
            mean_est[k] /= n;
            avg += mean_ospa[k];
        }
        std::vector<int> scans(K);
        for (std::size_t k = 0; k < K; ++k) scans[k] = static_cast<int>(k) + 1;
        summary["scans"] = scans;
        summary["mean_ospa"] = mean_ospa;
        summary["mean_ospa_localization"] = mean_loc;
        summary["mean_ospa_cardinality"] = mean_card;
        summary["true_cardinality"] = true_n;
        summary["mean_estimated_cardinality"] = mean_est;
        summary["time_average_ospa"] = avg / static_cast<double>(K);
        summary["mean_cardinality_error"] = card_err / (n * static_cast<double>(K));
        summary["mean_solver_seconds"] = solver_total / n;
        summary["mean_wall_seconds"] = wall_total / n;
    }
    open_out(root / "mc_summary.json") << summary.dump(1) << '\n';
    log << ok << "/" << config.mc_trials << " trials succeeded; summary in " << (root / "mc_summary.json").string()
        << '\n';
    return ok > 0 ? kExitOk : kExitRuntime;
}

}  // namespace glmb::cli
