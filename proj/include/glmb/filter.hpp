#pragma once

#include "glmb/association.hpp"
#include "glmb/core.hpp"
#include "glmb/densities.hpp"
#include "glmb/models.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace glmb {

enum class Solver {
    gibbs,
    murty,
    /// All positive 1-1 vectors per parent, no allocation. Test use only.
    exhaustive,
};

enum class GibbsInit { zeros, optimal };

/// Multiplicative changes to birth, survival and detection used only when
/// choosing which children to keep. Child weights always use the model.
struct Tempering {
    double birth = 1.0;
    double survival = 1.0;
    double detection = 1.0;

    [[nodiscard]] bool neutral() const { return birth == 1.0 && survival == 1.0 && detection == 1.0; }
};

struct FilterConfig {
    int h_max = 1000;
    Tempering tempering;
    GibbsInit gibbs_init = GibbsInit::zeros;
    Solver solver = Solver::gibbs;
    std::uint64_t rng_seed = 0;
    /// Children whose normalized weight falls below this are dropped.
    double weight_floor = 1e-15;
    BackendOptions backend;

    /// Throws ContractError for h_max < 1 or tempering factors out of range.
    void validate() const;
};

struct Models {
    std::shared_ptr<const MotionModel> motion;
    std::shared_ptr<const MeasurementModel> measurement;
};

/// Predicted single-track quantities for every candidate label of a
/// parent: surviving labels first (in component order), then births.
/// `existence[i]` is P̄_S for surviving rows and r_B for birth rows.
struct PredictedComponent {
    int surviving = 0;
    std::vector<Label> labels;
    std::vector<double> existence;
    std::vector<TrackDensity> densities;
};

[[nodiscard]] PredictedComponent predict_density(const GlmbComponent& component, int next_scan,
                                                 const MotionModel& motion, Rng& rng,
                                                 const BackendOptions& backend = {});

/// η table from existence values and ln ψ̄ rows (length M + 1, j = 0..M).
[[nodiscard]] AssociationProblem build_problem(int surviving, const std::vector<Label>& labels,
                                               const std::vector<double>& existence,
                                               const std::vector<Eigen::VectorXd>& log_psi_bar,
                                               const Tempering& tempering = {});

[[nodiscard]] AssociationProblem build_problem(const PredictedComponent& predicted,
                                               const MeasurementSet& measurements, const Models& models,
                                               const Tempering& tempering = {});

struct StepDiagnostics {
    int scan = 0;
    int parents = 0;
    int children = 0;
    int measurements = 0;
    int max_rows = 0;
    double solver_seconds = 0.0;
    /// 1 / Σ w² over the output components.
    double weight_ess = 0.0;
    /// ln Σ of the unnormalized child weights before the floor is applied.
    double log_captured_mass = 0.0;
    /// Set when every child was pruned and the empty set was returned.
    bool degenerate = false;
};

/// One joint prediction-update step from `density` (scan k) to scan k + 1.
[[nodiscard]] GlmbDensity joint_step(const GlmbDensity& density, const MeasurementSet& measurements,
                                     const Models& models, const FilterConfig& config,
                                     StepDiagnostics* diagnostics = nullptr);

/// Σ_h T_h = total; T_h drawn by sequential binomials over `weights`.
[[nodiscard]] std::vector<int> multinomial_allocation(const std::vector<double>& weights, int total, Rng& rng);

}  // namespace glmb
