#pragma once

#include "glmb/core.hpp"
#include "glmb/filter.hpp"
#include "glmb/models.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace glmb {

struct BirthSiteParams {
    double existence = 0.0;
    Eigen::VectorXd mean;
    /// Per-axis standard deviations of the diagonal birth covariance.
    Eigen::VectorXd stddev;
};

/// Constant-velocity motion on [p_x, v_x, p_y, v_y], position observations
/// on the square [-half_width, half_width]². Units: m, s.
struct LinearParams {
    double dt = 1.0;
    double sigma_v = 5.0;
    double survival = 0.99;
    double sigma_obs = 10.0;
    double detection = 0.88;
    double clutter = 1.65e-5;
    double half_width = 1000.0;
    std::vector<BirthSiteParams> births;
};

/// Coordinated turn on [p_x, v_x, p_y, v_y, ω], bearing/range observations
/// on a half disc. Units: m, s, rad.
struct NonlinearParams {
    double dt = 1.0;
    double sigma_accel = 15.0;
    double sigma_turn = 0.0;
    double survival = 0.99;
    double sigma_bearing = 0.0;
    double sigma_range = 5.0;
    double radius = 2000.0;
    double clutter = 1.6e-2;
    double pd_peak = 0.95;
    double pd_edge = 0.88;
    std::vector<BirthSiteParams> births;
};

/// A scripted object: alive on scans [spawn, death), moving along the
/// noise-free transition from `initial` at scan `spawn`.
struct TruthObject {
    Label label;
    int spawn = 1;
    int death = 2;
    Eigen::VectorXd initial;
};

struct ScenarioSpec {
    std::string name;
    int duration = 100;
    std::vector<TruthObject> objects;
    std::variant<LinearParams, NonlinearParams> params;
    Tempering tempering;

    [[nodiscard]] Models build_models() const;
    /// Scales the clutter intensity in place.
    void scale_clutter(double factor);
    /// Throws ContractError when a truth object has death <= spawn or a
    /// parameter is out of range.
    void validate() const;
    [[nodiscard]] int state_dim() const;
};

[[nodiscard]] ScenarioSpec linear_scenario();
[[nodiscard]] ScenarioSpec nonlinear_scenario();

struct TruthState {
    int object = 0;
    Label label;
    Eigen::VectorXd state;
};

/// Scan k (1-based) lives at index k - 1.
struct Simulation {
    std::vector<std::vector<TruthState>> truth;
    std::vector<MeasurementSet> measurements;
    /// Truth object index per measurement, -1 for clutter.
    std::vector<std::vector<int>> origins;
};

[[nodiscard]] std::vector<std::vector<TruthState>> truth_tracks(const ScenarioSpec& spec);
[[nodiscard]] Simulation simulate(const ScenarioSpec& spec, std::uint64_t seed);

struct OspaParams {
    double cutoff = 100.0;
    double order = 1.0;
};

struct OspaResult {
    double total = 0.0;
    double localization = 0.0;
    double cardinality = 0.0;
};

/// OSPA distance between two finite point sets; 0 when both are empty.
[[nodiscard]] OspaResult ospa(const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& y,
                              const OspaParams& params = {});

/// [p_x, p_y] from states ordered [p_x, v_x, p_y, v_y, ...].
[[nodiscard]] Eigen::Vector2d position_of(const Eigen::VectorXd& state);

/// Share of alive object-scans whose OSPA-matched estimate (distance below
/// `cutoff`) carries the label most often matched to that object.
[[nodiscard]] double label_consistent_coverage(const std::vector<std::vector<TruthState>>& truth,
                                               const std::vector<std::vector<TrackEstimate>>& estimates,
                                               double cutoff);

[[nodiscard]] std::string scenario_to_json(const ScenarioSpec& spec);
/// Throws std::invalid_argument on malformed documents.
[[nodiscard]] ScenarioSpec scenario_from_json(const std::string& text);

}  // namespace glmb
