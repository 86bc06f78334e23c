#pragma once

#include "glmb/core.hpp"
#include "glmb/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace glmb {

using Measurement = Eigen::VectorXd;
using MeasurementSet = std::vector<Measurement>;

struct LinearTransition {
    Eigen::MatrixXd F;
    Eigen::MatrixXd Q;
};

/// One LMB birth term: existence probability r_B and kinematic prior.
struct BirthSite {
    double existence = 0.0;
    GaussianMixture density;
};

/// Survival, single-object Markov transition and LMB birth.
class MotionModel {
public:
    explicit MotionModel(std::vector<BirthSite> births);
    virtual ~MotionModel() = default;

    [[nodiscard]] virtual int state_dim() const = 0;
    [[nodiscard]] virtual double survival_prob(const Eigen::VectorXd& x, const Label& label) const = 0;
    /// Set when P_S does not depend on the state (needed by the GM backend).
    [[nodiscard]] virtual std::optional<double> constant_survival() const { return std::nullopt; }

    /// One draw from f(·|x).
    [[nodiscard]] virtual Eigen::VectorXd propagate(const Eigen::VectorXd& x, Rng& rng) const = 0;
    /// Noise-free transition, used to script ground truth.
    [[nodiscard]] virtual Eigen::VectorXd propagate_mean(const Eigen::VectorXd& x) const = 0;
    /// Propagates every column of `particles` in place.
    virtual void propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const;

    /// Non-null when f(·|x) = N(·; Fx, Q).
    [[nodiscard]] virtual const LinearTransition* linear() const { return nullptr; }

    [[nodiscard]] const std::vector<BirthSite>& birth_sites() const { return births_; }
    /// Birth labels for `scan` are (scan, 1), ..., (scan, |B|).
    [[nodiscard]] std::vector<std::pair<Label, const BirthSite*>> births(int scan) const;

private:
    std::vector<BirthSite> births_;
};

class LinearGaussianMotion final : public MotionModel {
public:
    LinearGaussianMotion(Eigen::MatrixXd F, Eigen::MatrixXd Q, double survival, std::vector<BirthSite> births);

    [[nodiscard]] int state_dim() const override { return static_cast<int>(kit_.F.rows()); }
    [[nodiscard]] double survival_prob(const Eigen::VectorXd&, const Label&) const override { return survival_; }
    [[nodiscard]] std::optional<double> constant_survival() const override { return survival_; }
    [[nodiscard]] Eigen::VectorXd propagate(const Eigen::VectorXd& x, Rng& rng) const override;
    [[nodiscard]] Eigen::VectorXd propagate_mean(const Eigen::VectorXd& x) const override { return kit_.F * x; }
    void propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const override;
    [[nodiscard]] const LinearTransition* linear() const override { return &kit_; }

private:
    LinearTransition kit_;
    Eigen::MatrixXd noise_factor_;
    double survival_;
};

/// Constant-velocity model on [p_x, v_x, p_y, v_y] with white acceleration
/// noise of standard deviation `sigma_v` (m/s²), period `dt` (s).
[[nodiscard]] LinearTransition constant_velocity(double dt, double sigma_v);

/// Coordinated turn on [p_x, v_x, p_y, v_y, ω] (m, m/s, rad/s).
class CoordinatedTurnMotion final : public MotionModel {
public:
    CoordinatedTurnMotion(double dt, double sigma_accel, double sigma_turn, double survival,
                          std::vector<BirthSite> births);

    [[nodiscard]] int state_dim() const override { return 5; }
    [[nodiscard]] double survival_prob(const Eigen::VectorXd&, const Label&) const override { return survival_; }
    [[nodiscard]] std::optional<double> constant_survival() const override { return survival_; }
    [[nodiscard]] Eigen::VectorXd propagate(const Eigen::VectorXd& x, Rng& rng) const override;
    [[nodiscard]] Eigen::VectorXd propagate_mean(const Eigen::VectorXd& x) const override;
    void propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const override;

    /// F(ω); the ω → 0 limit is the constant-velocity block.
    [[nodiscard]] static Eigen::Matrix<double, 5, 5> transition_matrix(double omega, double dt = 1.0);
    [[nodiscard]] Eigen::MatrixXd process_noise() const;

private:
    double dt_;
    double sigma_accel_;
    double sigma_turn_;
    double survival_;
    Eigen::Matrix<double, 4, 2> G_;
};

/// Detection, single-measurement likelihood N(z; h(x), R) and Poisson clutter.
class MeasurementModel {
public:
    explicit MeasurementModel(Eigen::MatrixXd noise_cov);
    virtual ~MeasurementModel() = default;

    [[nodiscard]] int meas_dim() const { return static_cast<int>(R_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& noise_cov() const { return R_; }

    [[nodiscard]] virtual double detection_prob(const Eigen::VectorXd& x, const Label& label) const = 0;
    [[nodiscard]] virtual std::optional<double> constant_detection() const { return std::nullopt; }

    /// Noise-free observation h(x).
    [[nodiscard]] virtual Eigen::VectorXd observe(const Eigen::VectorXd& x) const = 0;
    /// z - h(x), with angular components wrapped where applicable.
    [[nodiscard]] virtual Eigen::VectorXd residual(const Eigen::VectorXd& z, const Eigen::VectorXd& hx) const {
        return z - hx;
    }

    [[nodiscard]] double log_likelihood(const Measurement& z, const Eigen::VectorXd& x) const;
    [[nodiscard]] double likelihood(const Measurement& z, const Eigen::VectorXd& x) const;
    /// ln N(z; hx, R) for a precomputed observation hx.
    [[nodiscard]] double log_likelihood_observed(const Measurement& z, const Eigen::VectorXd& hx) const;

    /// Clutter intensity κ(z) (expected false alarms per unit measurement volume).
    [[nodiscard]] virtual double clutter_intensity(const Measurement& z) const = 0;
    /// Mean clutter count per scan, λ_c × region volume.
    [[nodiscard]] virtual double expected_clutter() const = 0;
    [[nodiscard]] virtual Measurement sample_clutter(Rng& rng) const = 0;
    [[nodiscard]] virtual bool in_region(const Eigen::VectorXd& x) const = 0;

    [[nodiscard]] Measurement sample(const Eigen::VectorXd& x, Rng& rng) const;

    /// Non-null when h(x) = Hx; the returned matrix is H.
    [[nodiscard]] virtual const Eigen::MatrixXd* linear() const { return nullptr; }

private:
    Eigen::MatrixXd R_;
    Eigen::MatrixXd R_inv_;
    Eigen::MatrixXd R_factor_;
    double log_norm_;
};

/// z = Hx + v on a box-shaped observation region with uniform clutter.
class LinearGaussianMeasurement final : public MeasurementModel {
public:
    LinearGaussianMeasurement(Eigen::MatrixXd H, Eigen::MatrixXd R, double detection,
                              double clutter_density, Eigen::VectorXd region_lo, Eigen::VectorXd region_hi);

    [[nodiscard]] double detection_prob(const Eigen::VectorXd&, const Label&) const override { return detection_; }
    [[nodiscard]] std::optional<double> constant_detection() const override { return detection_; }
    [[nodiscard]] Eigen::VectorXd observe(const Eigen::VectorXd& x) const override { return H_ * x; }
    [[nodiscard]] double clutter_intensity(const Measurement&) const override { return clutter_density_; }
    [[nodiscard]] double expected_clutter() const override;
    [[nodiscard]] Measurement sample_clutter(Rng& rng) const override;
    [[nodiscard]] bool in_region(const Eigen::VectorXd& x) const override;
    [[nodiscard]] const Eigen::MatrixXd* linear() const override { return &H_; }

private:
    Eigen::MatrixXd H_;
    double detection_;
    double clutter_density_;
    Eigen::VectorXd lo_;
    Eigen::VectorXd hi_;
};

/// Bearing/range z = [θ, r] with θ = atan2(p_x, p_y) (clockwise from the
/// +y axis), observed on the half disc p_y >= 0, r <= radius. Clutter is
/// uniform on [-π/2, π/2] × [0, radius]. Detection follows an isotropic
/// unnormalized Gaussian profile equal to `pd_peak` at the origin and
/// `pd_edge` at range `radius`.
class RangeBearingMeasurement final : public MeasurementModel {
public:
    RangeBearingMeasurement(double sigma_bearing, double sigma_range, double radius, double clutter_density,
                            double pd_peak, double pd_edge);

    [[nodiscard]] double detection_prob(const Eigen::VectorXd& x, const Label&) const override;
    [[nodiscard]] Eigen::VectorXd observe(const Eigen::VectorXd& x) const override;
    [[nodiscard]] Eigen::VectorXd residual(const Eigen::VectorXd& z, const Eigen::VectorXd& hx) const override;
    [[nodiscard]] double clutter_intensity(const Measurement& z) const override;
    [[nodiscard]] double expected_clutter() const override;
    [[nodiscard]] Measurement sample_clutter(Rng& rng) const override;
    [[nodiscard]] bool in_region(const Eigen::VectorXd& x) const override;

    /// Squared scale s² of P_D(x) = pd_peak·exp(-|p|² / (2 s²)).
    [[nodiscard]] double detection_scale_sq() const { return scale_sq_; }

private:
    double radius_;
    double clutter_density_;
    double pd_peak_;
    double scale_sq_;
};

/// ψ^{(j)}_Z(x, ℓ): P_D g(z_j|x)/κ(z_j) for j ≥ 1 and 1 - P_D for j = 0.
/// Throws std::out_of_range for j outside {0..|Z|}.
[[nodiscard]] double psi(const MeasurementSet& measurements, int j, const Eigen::VectorXd& x, const Label& label,
                         const MeasurementModel& model);

[[nodiscard]] double wrap_angle(double a);

}  // namespace glmb
