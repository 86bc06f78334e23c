#pragma once

#include "glmb/association.hpp"
#include "glmb/filter.hpp"
#include "glmb/scenarios.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace glmb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kSchemaVersion = 1;

/// Raised for invalid configurations and malformed inputs (exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string scenario = "linear";
    std::string scenario_file;
    std::string solver = "gibbs";
    int h_max = 1000;
    int mc_trials = 1;
    std::uint64_t seed = 1;
    std::string output_dir = "glmb_out";
    /// "gm", "smc", or empty for the scenario default.
    std::string backend;
    int particles = 1000;
    int jobs = 1;
    double clutter_scale = 1.0;
    bool no_tempering = false;
    bool dump_density = false;
    double ospa_cutoff = 100.0;
    double ospa_order = 1.0;
};

/// Scenario selected by the config, clutter scaling applied.
[[nodiscard]] ScenarioSpec load_scenario(const RunConfig& config);

/// Filter settings implied by the config for `spec`; throws UsageError.
[[nodiscard]] FilterConfig filter_config(const RunConfig& config, const ScenarioSpec& spec);

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<double> ospa;
    std::vector<double> ospa_localization;
    std::vector<double> ospa_cardinality;
    std::vector<int> true_n;
    std::vector<int> estimated_n;
    std::vector<double> solver_seconds;
    double wall_seconds = 0.0;
    std::vector<std::vector<TruthState>> truth;
    std::vector<std::vector<TrackEstimate>> estimates;
};

/// Simulates and filters one Monte Carlo trial. Writes the per-trial files
/// into `dir` when it is non-empty.
[[nodiscard]] TrialResult run_trial(const ScenarioSpec& spec, const RunConfig& config, int trial,
                                    const std::filesystem::path& dir);

/// Runs every trial (concurrently when jobs > 1), writes mc_summary.json
/// and returns the process exit code.
int run(const RunConfig& config, std::ostream& log);

/// Column names of each CSV written by `run`.
[[nodiscard]] std::vector<std::string> tracks_columns(const ScenarioSpec& spec);
[[nodiscard]] std::vector<std::string> truth_columns(const ScenarioSpec& spec);
[[nodiscard]] std::vector<std::string> measurement_columns(const ScenarioSpec& spec);
[[nodiscard]] std::vector<std::string> ospa_columns();
[[nodiscard]] std::vector<std::string> cardinality_columns();

/// Components as {labels, log_weight, means}.
[[nodiscard]] std::string density_to_json(const GlmbDensity& density);

void write_simulation(const ScenarioSpec& spec, const Simulation& sim, const std::filesystem::path& dir);

struct BenchConfig {
    std::vector<int> p_values{10, 20, 40, 80};
    std::vector<int> m_values{10, 20, 40, 80, 160, 320};
    int fixed_p = 20;
    int fixed_m = 80;
    int gibbs_samples = 1000;
    int murty_solutions = 5;
    int repeats = 3;
    std::uint64_t seed = 7;
    bool sweep_murty = true;
    /// Equal-T head-to-head comparison point.
    int compare_p = 40;
    int compare_m = 160;
    int compare_samples = 100;
};

struct BenchPoint {
    int P = 0;
    int M = 0;
    double gibbs_seconds = 0.0;
    /// Negative when not measured.
    double murty_seconds = -1.0;
};

struct BenchReport {
    std::vector<BenchPoint> m_sweep;
    std::vector<BenchPoint> p_sweep;
    double gibbs_slope_m = 0.0;
    double gibbs_slope_p = 0.0;
    double murty_slope_size = 0.0;
    BenchPoint comparison;
    int compare_samples = 0;
};

/// Synthetic η table with ln η uniform on [-6, 0].
[[nodiscard]] AssociationProblem random_problem(int P, int M, std::uint64_t seed);

/// Least-squares slope of ln y against ln x.
[[nodiscard]] double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

[[nodiscard]] BenchReport bench_scaling(const BenchConfig& config);
[[nodiscard]] std::string bench_to_json(const BenchReport& report);
void print_bench(const BenchReport& report, std::ostream& out);

/// Parses P rows of M + 2 positive comma-separated values (columns
/// j = -1, 0, 1..M). A leading non-numeric header row and lines starting
/// with '#' are skipped. Throws UsageError naming the offending line.
[[nodiscard]] AssociationProblem parse_eta_csv(std::istream& in);

struct RankedAssignment {
    AssignmentVector gamma;
    double log_weight = 0.0;
};

[[nodiscard]] std::vector<RankedAssignment> assign(const AssociationProblem& problem, int T,
                                                   const std::string& solver, std::uint64_t seed);
void write_assignments_csv(const std::vector<RankedAssignment>& ranked, int P, std::ostream& out);

/// Entry point shared by the executable: returns the exit code.
int main_entry(int argc, char** argv);

/// Formats a double for CSV/JSON output.
[[nodiscard]] std::string fmt(double v);

}  // namespace glmb::cli
