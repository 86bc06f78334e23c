#include "glmb/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glmb {

std::string to_string(const Label& label) {
    return std::to_string(label.birth_time) + ":" + std::to_string(label.index);
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
    GaussianMixture gm;
    gm.weights.push_back(1.0);
    gm.means.push_back(std::move(mean));
    gm.covariances.push_back(std::move(covariance));
    return gm;
}

Eigen::VectorXd density_mean(const TrackDensity& density) {
    return std::visit(
        [](const auto& d) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianMixture>) {
                Eigen::VectorXd mean = Eigen::VectorXd::Zero(d.dim());
                for (std::size_t c = 0; c < d.size(); ++c) mean += d.weights[c] * d.means[c];
                return mean;
            } else {
                return d.states * d.weights;
            }
        },
        density);
}

int density_dim(const TrackDensity& density) {
    return std::visit([](const auto& d) { return d.dim(); }, density);
}

namespace {

void check_weights(std::span<const double> w, double tol) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) throw ContractError("density weight is negative or NaN");
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol) throw ContractError("density weights do not sum to one");
}

}  // namespace

void validate_density(const TrackDensity& density, double tol) {
    if (const auto* gm = std::get_if<GaussianMixture>(&density)) {
        if (gm->weights.empty()) throw ContractError("empty Gaussian mixture");
        if (gm->means.size() != gm->size() || gm->covariances.size() != gm->size())
            throw ContractError("Gaussian mixture arrays differ in length");
        check_weights(gm->weights, tol);
        for (const auto& cov : gm->covariances) {
            if (!cov.isApprox(cov.transpose(), 1e-9)) throw ContractError("covariance not symmetric");
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() != Eigen::Success) throw ContractError("covariance not positive definite");
        }
    } else {
        const auto& ps = std::get<ParticleSet>(density);
        if (ps.size() == 0) throw ContractError("empty particle set");
        if (ps.states.cols() != ps.weights.size()) throw ContractError("particle arrays differ in length");
        check_weights({ps.weights.data(), ps.size()}, tol);
    }
}

const TrackDensity* GlmbComponent::density(const Label& label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) return nullptr;
    return &tracks[static_cast<std::size_t>(it - labels.begin())]->density;
}

void GlmbComponent::validate() const {
    if (tracks.size() != labels.size()) throw ContractError("component has one density per label");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!tracks[i] || tracks[i]->label != labels[i]) throw ContractError("track/label mismatch");
        if (i > 0 && !(labels[i - 1] < labels[i])) throw ContractError("labels not sorted and distinct");
    }
}

GlmbDensity GlmbDensity::empty_set(int scan_time) {
    GlmbDensity d;
    d.scan_time = scan_time;
    d.components.push_back(GlmbComponent{});
    return d;
}

double log_sum_exp(std::span<const double> values) {
    double max = -std::numeric_limits<double>::infinity();
    for (double v : values) max = std::max(max, v);
    if (!std::isfinite(max)) return max;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - max);
    return max + std::log(sum);
}

void GlmbDensity::normalize() {
    std::vector<double> lw;
    lw.reserve(components.size());
    for (const auto& c : components) lw.push_back(c.log_weight);
    const double total = log_sum_exp(lw);
    if (!std::isfinite(total)) throw NumericalError("GLMB has no finite weight mass");
    for (auto& c : components) c.log_weight -= total;
}

double GlmbDensity::total_weight() const {
    double sum = 0.0;
    for (const auto& c : components) sum += std::exp(c.log_weight);
    return sum;
}

std::map<int, double> cardinality_distribution(const GlmbDensity& density) {
    if (density.components.empty()) throw std::invalid_argument("empty GLMB");
    std::map<int, double> rho;
    for (const auto& c : density.components)
        rho[static_cast<int>(c.cardinality())] += std::exp(c.log_weight);
    return rho;
}

std::vector<TrackEstimate> estimate_state(const GlmbDensity& density) {
    const auto rho = cardinality_distribution(density);
    int n_map = rho.begin()->first;
    double best = rho.begin()->second;
    for (const auto& [n, p] : rho) {
        if (p > best) {
            best = p;
            n_map = n;
        }
    }
    const GlmbComponent* chosen = nullptr;
    for (const auto& c : density.components) {
        if (static_cast<int>(c.cardinality()) != n_map) continue;
        if (chosen == nullptr || c.log_weight > chosen->log_weight) chosen = &c;
    }
    std::vector<TrackEstimate> out;
    for (std::size_t i = 0; i < chosen->labels.size(); ++i)
        out.push_back({chosen->labels[i], density_mean(chosen->tracks[i]->density)});
    return out;
}

}  // namespace glmb
