#include "glmb/densities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace glmb {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt;
    const double jitter = 1e-9 * cov.trace() / static_cast<double>(cov.rows());
    Eigen::MatrixXd bumped = cov;
    bumped.diagonal().array() += std::max(jitter, std::numeric_limits<double>::min());
    llt.compute(bumped);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance is not factorizable after jitter");
    return llt;
}

double log_pdf_factored(const Eigen::VectorXd& residual, const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::VectorXd u = llt.matrixL().solve(residual);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const auto d = static_cast<double>(residual.size());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + u.squaredNorm());
}

void symmetrize(Eigen::MatrixXd& P) {
    P = 0.5 * (P + P.transpose());
}

void require_linear(const LinearTransition* f, std::optional<double> ps) {
    if (f == nullptr || !ps) throw ContractError("mixture prediction needs a linear transition and constant P_S");
}

}  // namespace

double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    if (x.size() != mean.size() || cov.rows() != mean.size() || cov.cols() != mean.size())
        throw std::invalid_argument("gaussian_log_pdf dimension mismatch");
    return log_pdf_factored(x - mean, factor_with_jitter(cov));
}

GaussianMixture gm_predict(const GaussianMixture& gm, const LinearGaussianKit& kit) {
    GaussianMixture out;
    out.weights = gm.weights;
    out.means.reserve(gm.size());
    out.covariances.reserve(gm.size());
    for (std::size_t c = 0; c < gm.size(); ++c) {
        if (gm.means[c].size() != kit.F.cols() || kit.Q.rows() != kit.F.rows())
            throw std::invalid_argument("gm_predict dimension mismatch");
        out.means.push_back(kit.F * gm.means[c]);
        Eigen::MatrixXd P = kit.F * gm.covariances[c] * kit.F.transpose() + kit.Q;
        symmetrize(P);
        out.covariances.push_back(std::move(P));
    }
    return out;
}

GmUpdate gm_psi_bar(const GaussianMixture& gm, const Measurement* z, const LinearGaussianKit& kit, double detection,
                    double clutter) {
    GmUpdate out;
    if (z == nullptr) {
        out.psi_bar = 1.0 - detection;
        out.log_psi_bar = std::log1p(-detection);
        out.posterior = gm;
        return out;
    }
    if (z->size() != kit.H.rows()) throw std::invalid_argument("measurement dimension mismatch");
    const auto n = gm.size();
    std::vector<double> log_w(n);
    out.posterior.means.reserve(n);
    out.posterior.covariances.reserve(n);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(kit.F.rows(), kit.F.rows());
    for (std::size_t c = 0; c < n; ++c) {
        const Eigen::MatrixXd& P = gm.covariances[c];
        const Eigen::MatrixXd PHt = P * kit.H.transpose();
        Eigen::MatrixXd S = kit.H * PHt + kit.R;
        symmetrize(S);
        const auto llt = factor_with_jitter(S);
        const Eigen::VectorXd e = *z - kit.H * gm.means[c];
        log_w[c] = std::log(gm.weights[c]) + log_pdf_factored(e, llt);
        const Eigen::MatrixXd K = llt.solve(PHt.transpose()).transpose();
        const Eigen::MatrixXd A = I - K * kit.H;
        Eigen::MatrixXd Pu = A * P * A.transpose() + K * kit.R * K.transpose();
        symmetrize(Pu);
        out.posterior.means.push_back(gm.means[c] + K * e);
        out.posterior.covariances.push_back(std::move(Pu));
    }
    const double lse = log_sum_exp(log_w);
    out.log_psi_bar = std::log(detection) - std::log(clutter) + lse;
    out.psi_bar = std::exp(out.log_psi_bar);
    if (!std::isfinite(lse)) throw NumericalError("mixture update has zero likelihood mass");
    out.posterior.weights.resize(n);
    for (std::size_t c = 0; c < n; ++c) out.posterior.weights[c] = std::exp(log_w[c] - lse);
    return out;
}

GaussianMixture gm_prune_merge(const GaussianMixture& gm, const GmManagement& opts) {
    std::vector<std::size_t> alive;
    for (std::size_t c = 0; c < gm.size(); ++c)
        if (gm.weights[c] >= opts.prune_below) alive.push_back(c);
    if (alive.empty()) {
        alive.resize(1);
        alive[0] = static_cast<std::size_t>(std::max_element(gm.weights.begin(), gm.weights.end()) -
                                            gm.weights.begin());
    }
    GaussianMixture out;
    std::vector<bool> used(gm.size(), false);
    while (true) {
        std::size_t best = gm.size();
        for (std::size_t c : alive)
            if (!used[c] && (best == gm.size() || gm.weights[c] > gm.weights[best])) best = c;
        if (best == gm.size()) break;
        const auto llt = factor_with_jitter(gm.covariances[best]);
        std::vector<std::size_t> group;
        for (std::size_t c : alive) {
            if (used[c]) continue;
            const Eigen::VectorXd d = gm.means[c] - gm.means[best];
            if ((llt.matrixL().solve(d)).squaredNorm() <= opts.merge_distance) group.push_back(c);
        }
        double w = 0.0;
        Eigen::VectorXd m = Eigen::VectorXd::Zero(gm.dim());
        for (std::size_t c : group) {
            used[c] = true;
            w += gm.weights[c];
            m += gm.weights[c] * gm.means[c];
        }
        m /= w;
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(gm.dim(), gm.dim());
        for (std::size_t c : group) {
            const Eigen::VectorXd d = gm.means[c] - m;
            P += gm.weights[c] * (gm.covariances[c] + d * d.transpose());
        }
        P /= w;
        symmetrize(P);
        out.weights.push_back(w);
        out.means.push_back(std::move(m));
        out.covariances.push_back(std::move(P));
    }
    if (out.size() > opts.max_components) {
        std::vector<std::size_t> order(out.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return out.weights[a] > out.weights[b]; });
        order.resize(opts.max_components);
        GaussianMixture capped;
        for (std::size_t c : order) {
            capped.weights.push_back(out.weights[c]);
            capped.means.push_back(out.means[c]);
            capped.covariances.push_back(out.covariances[c]);
        }
        out = std::move(capped);
    }
    const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    for (double& w : out.weights) w /= total;
    return out;
}

double effective_sample_size(const Eigen::VectorXd& weights) {
    const double s = weights.sum();
    return s * s / weights.squaredNorm();
}

void systematic_resample(ParticleSet& particles, Rng& rng) {
    const Eigen::Index n = particles.states.cols();
    const double total = particles.weights.sum();
    Eigen::MatrixXd states(particles.states.rows(), n);
    const double step = total / static_cast<double>(n);
    double u = uniform01(rng) * step;
    double cum = particles.weights[0];
    Eigen::Index src = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        while (u > cum && src + 1 < n) cum += particles.weights[++src];
        states.col(k) = particles.states.col(src);
        u += step;
    }
    particles.states = std::move(states);
    particles.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

ParticleSet sample_particles(const GaussianMixture& gm, int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("particle count must be positive");
    std::vector<Eigen::MatrixXd> factors;
    for (const auto& cov : gm.covariances) factors.emplace_back(factor_with_jitter(cov).matrixL());
    std::discrete_distribution<std::size_t> pick(gm.weights.begin(), gm.weights.end());
    std::normal_distribution<double> nd(0.0, 1.0);
    ParticleSet out;
    out.states.resize(gm.dim(), count);
    out.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
    Eigen::VectorXd u(gm.dim());
    for (int p = 0; p < count; ++p) {
        const std::size_t c = gm.size() == 1 ? 0 : pick(rng);
        for (int d = 0; d < gm.dim(); ++d) u[d] = nd(rng);
        out.states.col(p) = gm.means[c] + factors[c] * u;
    }
    return out;
}

SmcPrediction smc_predict(const ParticleSet& particles, const Label& label, const MotionModel& motion, Rng& rng) {
    SmcPrediction out;
    out.predicted = particles;
    const auto ps_const = motion.constant_survival();
    if (ps_const) {
        out.survival = *ps_const;
    } else {
        Eigen::VectorXd ps(particles.weights.size());
        for (Eigen::Index p = 0; p < ps.size(); ++p) ps[p] = motion.survival_prob(particles.states.col(p), label);
        out.survival = particles.weights.dot(ps);
        if (!(out.survival > 0.0)) throw ContractError("predicted survival probability is zero");
        out.predicted.weights = particles.weights.cwiseProduct(ps) / out.survival;
    }
    motion.propagate_particles(out.predicted.states, rng);
    return out;
}

namespace {

Eigen::VectorXd log_detection_terms(const ParticleSet& ps, const Label& label, const MeasurementModel& model,
                                    Eigen::VectorXd* miss) {
    const Eigen::Index n = ps.states.cols();
    Eigen::VectorXd log_pd(n);
    if (miss) miss->resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        const double pd = model.detection_prob(ps.states.col(p), label);
        log_pd[p] = std::log(pd);
        if (miss) (*miss)[p] = 1.0 - pd;
    }
    return log_pd;
}

Eigen::MatrixXd observe_all(const ParticleSet& ps, const MeasurementModel& model) {
    Eigen::MatrixXd hx(model.meas_dim(), ps.states.cols());
    for (Eigen::Index p = 0; p < ps.states.cols(); ++p) hx.col(p) = model.observe(ps.states.col(p));
    return hx;
}

}  // namespace

Eigen::VectorXd smc_log_psi_bar_row(const ParticleSet& predicted, const Label& label,
                                    const MeasurementSet& measurements, const MeasurementModel& model) {
    const Eigen::Index n = predicted.states.cols();
    Eigen::VectorXd miss;
    const Eigen::VectorXd log_pd = log_detection_terms(predicted, label, model, &miss);
    Eigen::VectorXd row(static_cast<Eigen::Index>(measurements.size()) + 1);
    row[0] = std::log(predicted.weights.dot(miss));
    if (measurements.empty()) return row;
    const Eigen::MatrixXd hx = observe_all(predicted, model);
    Eigen::VectorXd base = predicted.weights.array().log().matrix() + log_pd;
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < measurements.size(); ++j) {
        const auto& z = measurements[j];
        for (Eigen::Index p = 0; p < n; ++p)
            terms[static_cast<std::size_t>(p)] = base[p] + model.log_likelihood_observed(z, hx.col(p));
        row[static_cast<Eigen::Index>(j) + 1] = log_sum_exp(terms) - std::log(model.clutter_intensity(z));
    }
    return row;
}

ParticleSet smc_posterior(const ParticleSet& predicted, const Label& label, const MeasurementSet& measurements, int j,
                          const MeasurementModel& model, Rng& rng) {
    if (j < 0 || j > static_cast<int>(measurements.size()))
        throw std::out_of_range("measurement index outside {0..M}");
    const Eigen::Index n = predicted.states.cols();
    ParticleSet out = predicted;
    Eigen::VectorXd log_w(n);
    if (j == 0) {
        Eigen::VectorXd miss;
        log_detection_terms(predicted, label, model, &miss);
        log_w = (predicted.weights.cwiseProduct(miss)).array().log().matrix();
    } else {
        const auto& z = measurements[static_cast<std::size_t>(j - 1)];
        const Eigen::VectorXd log_pd = log_detection_terms(predicted, label, model, nullptr);
        for (Eigen::Index p = 0; p < n; ++p)
            log_w[p] = std::log(predicted.weights[p]) + log_pd[p] +
                       model.log_likelihood(z, predicted.states.col(p));
    }
    const double lse = log_sum_exp({log_w.data(), static_cast<std::size_t>(n)});
    if (!std::isfinite(lse)) throw NumericalError("particle weights vanished in the update");
    out.weights = (log_w.array() - lse).exp().matrix();
    if (effective_sample_size(out.weights) < 0.5 * static_cast<double>(n)) systematic_resample(out, rng);
    return out;
}

SmcStep smc_predict_update(const ParticleSet& particles, const MeasurementSet& measurements, int j, const Label& label,
                           const MotionModel& motion, const MeasurementModel& model, Rng& rng) {
    auto pred = smc_predict(particles, label, motion, rng);
    const Eigen::VectorXd row = smc_log_psi_bar_row(pred.predicted, label, measurements, model);
    if (j < 0 || j >= row.size()) throw std::out_of_range("measurement index outside {0..M}");
    SmcStep out;
    out.survival = pred.survival;
    out.psi_bar = std::exp(row[j]);
    out.posterior = smc_posterior(pred.predicted, label, measurements, j, model, rng);
    return out;
}

PredictedTrack predict_track(const TrackDensity& density, const Label& label, const MotionModel& motion, Rng& rng) {
    if (const auto* gm = std::get_if<GaussianMixture>(&density)) {
        const auto* f = motion.linear();
        const auto ps = motion.constant_survival();
        require_linear(f, ps);
        LinearGaussianKit kit{f->F, f->Q, {}, {}};
        return {*ps, gm_predict(*gm, kit)};
    }
    auto pred = smc_predict(std::get<ParticleSet>(density), label, motion, rng);
    return {pred.survival, std::move(pred.predicted)};
}

TrackDensity birth_density(const BirthSite& site, const BackendOptions& opts, Rng& rng) {
    if (opts.backend == Backend::gm) return site.density;
    return sample_particles(site.density, opts.smc.particles_per_track, rng);
}

namespace {

LinearGaussianKit observation_kit(const MeasurementModel& model, double& pd) {
    const auto* H = model.linear();
    const auto cd = model.constant_detection();
    if (H == nullptr || !cd) throw ContractError("mixture update needs a linear observation and constant P_D");
    pd = *cd;
    return {Eigen::MatrixXd::Identity(H->cols(), H->cols()), {}, *H, model.noise_cov()};
}

}  // namespace

Eigen::VectorXd log_psi_bar_row(const TrackDensity& predicted, const Label& label, const MeasurementSet& measurements,
                                const MeasurementModel& model) {
    if (const auto* ps = std::get_if<ParticleSet>(&predicted))
        return smc_log_psi_bar_row(*ps, label, measurements, model);
    const auto& gm = std::get<GaussianMixture>(predicted);
    double pd = 0.0;
    const auto kit = observation_kit(model, pd);
    const auto M = static_cast<Eigen::Index>(measurements.size());
    Eigen::VectorXd row(M + 1);
    row[0] = std::log1p(-pd);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
    std::vector<Eigen::VectorXd> predicted_z;
    for (std::size_t c = 0; c < gm.size(); ++c) {
        Eigen::MatrixXd S = kit.H * gm.covariances[c] * kit.H.transpose() + kit.R;
        symmetrize(S);
        factors.push_back(factor_with_jitter(S));
        predicted_z.push_back(kit.H * gm.means[c]);
    }
    std::vector<double> terms(gm.size());
    for (Eigen::Index j = 0; j < M; ++j) {
        const auto& z = measurements[static_cast<std::size_t>(j)];
        for (std::size_t c = 0; c < gm.size(); ++c)
            terms[c] = std::log(gm.weights[c]) + log_pdf_factored(z - predicted_z[c], factors[c]);
        row[j + 1] = std::log(pd) - std::log(model.clutter_intensity(z)) + log_sum_exp(terms);
    }
    return row;
}

TrackDensity track_posterior(const TrackDensity& predicted, const Label& label, const MeasurementSet& measurements,
                             int j, const MeasurementModel& model, Rng& rng, const BackendOptions& opts) {
    if (const auto* ps = std::get_if<ParticleSet>(&predicted))
        return smc_posterior(*ps, label, measurements, j, model, rng);
    if (j < 0 || j > static_cast<int>(measurements.size()))
        throw std::out_of_range("measurement index outside {0..M}");
    const auto& gm = std::get<GaussianMixture>(predicted);
    double pd = 0.0;
    const auto kit = observation_kit(model, pd);
    const Measurement* z = j == 0 ? nullptr : &measurements[static_cast<std::size_t>(j - 1)];
    const double kappa = z ? model.clutter_intensity(*z) : 1.0;
    auto upd = gm_psi_bar(gm, z, kit, pd, kappa);
    if (upd.posterior.size() > 1) return gm_prune_merge(upd.posterior, opts.gm);
    return std::move(upd.posterior);
}

}  // namespace glmb
