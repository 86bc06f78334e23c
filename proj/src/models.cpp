#include "glmb/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace glmb {

namespace {

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd standard_normal(int n, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

void check_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) throw ContractError(std::string(what) + " must lie strictly inside (0,1)");
}

}  // namespace

double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0) a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

MotionModel::MotionModel(std::vector<BirthSite> births) : births_(std::move(births)) {
    for (const auto& b : births_) check_probability(b.existence, "birth probability");
}

void MotionModel::propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const {
    for (Eigen::Index p = 0; p < particles.cols(); ++p) particles.col(p) = propagate(particles.col(p), rng);
}

std::vector<std::pair<Label, const BirthSite*>> MotionModel::births(int scan) const {
    std::vector<std::pair<Label, const BirthSite*>> out;
    out.reserve(births_.size());
    for (std::size_t i = 0; i < births_.size(); ++i)
        out.emplace_back(Label{scan, static_cast<int>(i) + 1}, &births_[i]);
    return out;
}

LinearGaussianMotion::LinearGaussianMotion(Eigen::MatrixXd F, Eigen::MatrixXd Q, double survival,
                                           std::vector<BirthSite> births)
    : MotionModel(std::move(births)), kit_{std::move(F), std::move(Q)}, survival_(survival) {
    if (kit_.F.rows() != kit_.F.cols() || kit_.Q.rows() != kit_.F.rows() || kit_.Q.cols() != kit_.F.rows())
        throw std::invalid_argument("transition dimensions are inconsistent");
    check_probability(survival_, "survival probability");
    noise_factor_ = psd_factor(kit_.Q);
}

Eigen::VectorXd LinearGaussianMotion::propagate(const Eigen::VectorXd& x, Rng& rng) const {
    return kit_.F * x + noise_factor_ * standard_normal(state_dim(), rng);
}

void LinearGaussianMotion::propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd noise(particles.rows(), particles.cols());
    for (Eigen::Index c = 0; c < noise.cols(); ++c)
        for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, c) = nd(rng);
    particles = kit_.F * particles + noise_factor_ * noise;
}

LinearTransition constant_velocity(double dt, double sigma_v) {
    Eigen::Matrix2d f;
    f << 1.0, dt, 0.0, 1.0;
    Eigen::Vector2d g(dt * dt / 2.0, dt);
    Eigen::Matrix2d q = sigma_v * sigma_v * g * g.transpose();
    LinearTransition kit{Eigen::MatrixXd::Zero(4, 4), Eigen::MatrixXd::Zero(4, 4)};
    kit.F.block<2, 2>(0, 0) = f;
    kit.F.block<2, 2>(2, 2) = f;
    kit.Q.block<2, 2>(0, 0) = q;
    kit.Q.block<2, 2>(2, 2) = q;
    return kit;
}

CoordinatedTurnMotion::CoordinatedTurnMotion(double dt, double sigma_accel, double sigma_turn, double survival,
                                             std::vector<BirthSite> births)
    : MotionModel(std::move(births)), dt_(dt), sigma_accel_(sigma_accel), sigma_turn_(sigma_turn),
      survival_(survival) {
    check_probability(survival_, "survival probability");
    G_ << dt * dt / 2.0, 0.0, dt, 0.0, 0.0, dt * dt / 2.0, 0.0, dt;
}

Eigen::Matrix<double, 5, 5> CoordinatedTurnMotion::transition_matrix(double omega, double dt) {
    const double wt = omega * dt;
    const double s = std::sin(wt);
    const double c = std::cos(wt);
    double a = dt;
    double b = 0.0;
    if (std::abs(omega) > 1e-10) {
        a = s / omega;
        b = (1.0 - c) / omega;
    }
    Eigen::Matrix<double, 5, 5> F;
    F << 1, a, 0, -b, 0,  //
        0, c, 0, -s, 0,   //
        0, b, 1, a, 0,    //
        0, s, 0, c, 0,    //
        0, 0, 0, 0, 1;
    return F;
}

Eigen::MatrixXd CoordinatedTurnMotion::process_noise() const {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(5, 5);
    Q.block<4, 4>(0, 0) = sigma_accel_ * sigma_accel_ * G_ * G_.transpose();
    Q(4, 4) = sigma_turn_ * sigma_turn_;
    return Q;
}

Eigen::VectorXd CoordinatedTurnMotion::propagate_mean(const Eigen::VectorXd& x) const {
    return transition_matrix(x[4], dt_) * x;
}

Eigen::VectorXd CoordinatedTurnMotion::propagate(const Eigen::VectorXd& x, Rng& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd out = propagate_mean(x);
    const Eigen::Vector2d w(sigma_accel_ * nd(rng), sigma_accel_ * nd(rng));
    out.head<4>() += G_ * w;
    out[4] += sigma_turn_ * dt_ * nd(rng);
    return out;
}

void CoordinatedTurnMotion::propagate_particles(Eigen::MatrixXd& particles, Rng& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index p = 0; p < particles.cols(); ++p) {
        auto x = particles.col(p);
        const double omega = x[4];
        const double wt = omega * dt_;
        const double s = std::sin(wt);
        const double c = std::cos(wt);
        double a = dt_;
        double b = 0.0;
        if (std::abs(omega) > 1e-10) {
            a = s / omega;
            b = (1.0 - c) / omega;
        }
        const double px = x[0], vx = x[1], py = x[2], vy = x[3];
        const double w1 = sigma_accel_ * nd(rng);
        const double w2 = sigma_accel_ * nd(rng);
        const double u = sigma_turn_ * dt_ * nd(rng);
        x[0] = px + a * vx - b * vy + G_(0, 0) * w1;
        x[1] = c * vx - s * vy + G_(1, 0) * w1;
        x[2] = b * vx + py + a * vy + G_(2, 1) * w2;
        x[3] = s * vx + c * vy + G_(3, 1) * w2;
        x[4] = omega + u;
    }
}

MeasurementModel::MeasurementModel(Eigen::MatrixXd noise_cov) : R_(std::move(noise_cov)) {
    Eigen::LLT<Eigen::MatrixXd> llt(R_);
    if (R_.rows() != R_.cols() || llt.info() != Eigen::Success)
        throw std::invalid_argument("measurement noise covariance must be positive definite");
    R_inv_ = llt.solve(Eigen::MatrixXd::Identity(R_.rows(), R_.cols()));
    R_factor_ = llt.matrixL();
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(R_.rows()) * std::log(2.0 * std::numbers::pi) + log_det);
}

double MeasurementModel::log_likelihood_observed(const Measurement& z, const Eigen::VectorXd& hx) const {
    const Eigen::VectorXd e = residual(z, hx);
    return log_norm_ - 0.5 * e.dot(R_inv_ * e);
}

double MeasurementModel::log_likelihood(const Measurement& z, const Eigen::VectorXd& x) const {
    return log_likelihood_observed(z, observe(x));
}

double MeasurementModel::likelihood(const Measurement& z, const Eigen::VectorXd& x) const {
    return std::exp(log_likelihood(z, x));
}

Measurement MeasurementModel::sample(const Eigen::VectorXd& x, Rng& rng) const {
    return observe(x) + R_factor_ * standard_normal(meas_dim(), rng);
}

LinearGaussianMeasurement::LinearGaussianMeasurement(Eigen::MatrixXd H, Eigen::MatrixXd R, double detection,
                                                     double clutter_density, Eigen::VectorXd region_lo,
                                                     Eigen::VectorXd region_hi)
    : MeasurementModel(std::move(R)), H_(std::move(H)), detection_(detection), clutter_density_(clutter_density),
      lo_(std::move(region_lo)), hi_(std::move(region_hi)) {
    check_probability(detection_, "detection probability");
    if (H_.rows() != meas_dim() || lo_.size() != meas_dim() || hi_.size() != meas_dim())
        throw std::invalid_argument("observation dimensions are inconsistent");
    if (!(clutter_density_ > 0.0)) throw ContractError("clutter intensity must be positive");
}

double LinearGaussianMeasurement::expected_clutter() const {
    return clutter_density_ * (hi_ - lo_).prod();
}

Measurement LinearGaussianMeasurement::sample_clutter(Rng& rng) const {
    Measurement z(meas_dim());
    for (int i = 0; i < meas_dim(); ++i) z[i] = lo_[i] + (hi_[i] - lo_[i]) * uniform01(rng);
    return z;
}

bool LinearGaussianMeasurement::in_region(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = H_ * x;
    return (z.array() >= lo_.array()).all() && (z.array() <= hi_.array()).all();
}

RangeBearingMeasurement::RangeBearingMeasurement(double sigma_bearing, double sigma_range, double radius,
                                                 double clutter_density, double pd_peak, double pd_edge)
    : MeasurementModel(Eigen::Vector2d(sigma_bearing * sigma_bearing, sigma_range * sigma_range).asDiagonal()),
      radius_(radius), clutter_density_(clutter_density), pd_peak_(pd_peak) {
    check_probability(pd_peak, "peak detection probability");
    check_probability(pd_edge, "edge detection probability");
    if (!(pd_edge < pd_peak)) throw std::invalid_argument("detection profile must decay from the origin");
    if (!(clutter_density_ > 0.0)) throw ContractError("clutter intensity must be positive");
    scale_sq_ = radius * radius / (2.0 * std::log(pd_peak / pd_edge));
}

double RangeBearingMeasurement::detection_prob(const Eigen::VectorXd& x, const Label&) const {
    const double r2 = x[0] * x[0] + x[2] * x[2];
    return pd_peak_ * std::exp(-0.5 * r2 / scale_sq_);
}

Eigen::VectorXd RangeBearingMeasurement::observe(const Eigen::VectorXd& x) const {
    return Eigen::Vector2d(std::atan2(x[0], x[2]), std::hypot(x[0], x[2]));
}

Eigen::VectorXd RangeBearingMeasurement::residual(const Eigen::VectorXd& z, const Eigen::VectorXd& hx) const {
    return Eigen::Vector2d(wrap_angle(z[0] - hx[0]), z[1] - hx[1]);
}

double RangeBearingMeasurement::clutter_intensity(const Measurement&) const {
    return clutter_density_;
}

double RangeBearingMeasurement::expected_clutter() const {
    return clutter_density_ * std::numbers::pi * radius_;
}

Measurement RangeBearingMeasurement::sample_clutter(Rng& rng) const {
    return Eigen::Vector2d(std::numbers::pi * (uniform01(rng) - 0.5), radius_ * uniform01(rng));
}

bool RangeBearingMeasurement::in_region(const Eigen::VectorXd& x) const {
    return x[2] >= 0.0 && std::hypot(x[0], x[2]) <= radius_;
}

double psi(const MeasurementSet& measurements, int j, const Eigen::VectorXd& x, const Label& label,
           const MeasurementModel& model) {
    if (j < 0 || j > static_cast<int>(measurements.size()))
        throw std::out_of_range("measurement index outside {0..M}");
    const double pd = model.detection_prob(x, label);
    if (j == 0) return 1.0 - pd;
    const auto& z = measurements[static_cast<std::size_t>(j - 1)];
    return pd * model.likelihood(z, x) / model.clutter_intensity(z);
}

}  // namespace glmb
