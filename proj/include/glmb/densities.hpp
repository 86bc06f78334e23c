#pragma once

#include "glmb/core.hpp"
#include "glmb/models.hpp"
#include "glmb/rng.hpp"

#include <Eigen/Dense>

namespace glmb {

/// Linear-Gaussian transition and observation: f(x'|x) = N(x'; Fx, Q),
/// g(z|x) = N(z; Hx, R).
struct LinearGaussianKit {
    Eigen::MatrixXd F;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd H;
    Eigen::MatrixXd R;
};

/// Mixture management applied after every Kalman update.
struct GmManagement {
    double prune_below = 1e-5;
    double merge_distance = 4.0;
    std::size_t max_components = 100;
};

/// ln N(x; mean, cov). A singular covariance gets one jitter retry of
/// 1e-9·trace/dim on the diagonal before NumericalError is raised.
[[nodiscard]] double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov);

/// Each (w, m, P) becomes (w, Fm, FPFᵀ + Q).
[[nodiscard]] GaussianMixture gm_predict(const GaussianMixture& gm, const LinearGaussianKit& kit);

struct GmUpdate {
    double psi_bar = 0.0;
    double log_psi_bar = 0.0;
    GaussianMixture posterior;
};

/// ψ̄ and the Bayes posterior for one association. `z == nullptr` is the
/// missed-detection case (ψ̄ = 1 - P_D, posterior = prior).
[[nodiscard]] GmUpdate gm_psi_bar(const GaussianMixture& gm, const Measurement* z, const LinearGaussianKit& kit,
                                  double detection, double clutter);

/// Prune, merge by Mahalanobis distance and cap; weights renormalized.
[[nodiscard]] GaussianMixture gm_prune_merge(const GaussianMixture& gm, const GmManagement& opts = {});

struct SmcKit {
    int particles_per_track = 1000;
};

[[nodiscard]] double effective_sample_size(const Eigen::VectorXd& weights);

/// Systematic resampling to the same particle count, uniform weights.
void systematic_resample(ParticleSet& particles, Rng& rng);

[[nodiscard]] ParticleSet sample_particles(const GaussianMixture& gm, int count, Rng& rng);

struct SmcPrediction {
    double survival = 0.0;
    ParticleSet predicted;
};

/// P̄_S = Σ w P_S(x); weights become w·P_S(x)/P̄_S and particles are
/// drawn from the transition.
[[nodiscard]] SmcPrediction smc_predict(const ParticleSet& particles, const Label& label, const MotionModel& motion,
                                        Rng& rng);

/// ln ψ̄_j for j = 0..M.
[[nodiscard]] Eigen::VectorXd smc_log_psi_bar_row(const ParticleSet& predicted, const Label& label,
                                                  const MeasurementSet& measurements, const MeasurementModel& model);

/// Weights ∝ w·ψ_j(x), normalized; systematic resampling when the ESS
/// drops below half the particle count.
[[nodiscard]] ParticleSet smc_posterior(const ParticleSet& predicted, const Label& label,
                                        const MeasurementSet& measurements, int j, const MeasurementModel& model,
                                        Rng& rng);

struct SmcStep {
    double survival = 0.0;
    double psi_bar = 0.0;
    ParticleSet posterior;
};

/// Prediction then update on measurement j of `measurements` (0 = miss).
[[nodiscard]] SmcStep smc_predict_update(const ParticleSet& particles, const MeasurementSet& measurements, int j,
                                         const Label& label, const MotionModel& motion,
                                         const MeasurementModel& model, Rng& rng);

enum class Backend { gm, smc };

struct BackendOptions {
    Backend backend = Backend::gm;
    SmcKit smc;
    GmManagement gm;
};

/// Backend-independent single-track operations used by the filter.
struct PredictedTrack {
    double survival = 0.0;
    TrackDensity density;
};

/// Requires a linear transition with constant P_S for mixtures.
[[nodiscard]] PredictedTrack predict_track(const TrackDensity& density, const Label& label, const MotionModel& motion,
                                           Rng& rng);

[[nodiscard]] TrackDensity birth_density(const BirthSite& site, const BackendOptions& opts, Rng& rng);

/// ln ψ̄_j, j = 0..M. Requires a linear observation with constant P_D for mixtures.
[[nodiscard]] Eigen::VectorXd log_psi_bar_row(const TrackDensity& predicted, const Label& label,
                                              const MeasurementSet& measurements, const MeasurementModel& model);

[[nodiscard]] TrackDensity track_posterior(const TrackDensity& predicted, const Label& label,
                                           const MeasurementSet& measurements, int j, const MeasurementModel& model,
                                           Rng& rng, const BackendOptions& opts);

}  // namespace glmb
