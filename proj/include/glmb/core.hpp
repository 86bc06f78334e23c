#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace glmb {

/// Raised when a model or caller breaks a documented precondition
/// (probabilities outside (0,1), non positive 1-1 vectors, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when a density degenerates numerically (zero total weight,
/// non-factorizable innovation covariance after jitter).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Track label (k, i): scan of birth and a disambiguating index.
struct Label {
    int birth_time = 0;
    int index = 1;

    friend auto operator<=>(const Label&, const Label&) = default;
};

std::string to_string(const Label& label);

/// Weighted sum of Gaussians.
struct GaussianMixture {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covariances;

    [[nodiscard]] std::size_t size() const { return weights.size(); }
    [[nodiscard]] int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

    static GaussianMixture single(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
};

/// Weighted particle cloud. Column p of `states` is particle p.
struct ParticleSet {
    Eigen::VectorXd weights;
    Eigen::MatrixXd states;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
    [[nodiscard]] int dim() const { return static_cast<int>(states.rows()); }
};

using TrackDensity = std::variant<GaussianMixture, ParticleSet>;

[[nodiscard]] Eigen::VectorXd density_mean(const TrackDensity& density);
[[nodiscard]] int density_dim(const TrackDensity& density);

/// Throws ContractError if weights are negative, do not sum to one within
/// `tol`, or covariances are not symmetric positive definite.
void validate_density(const TrackDensity& density, double tol = 1e-9);

/// One single-object track: the label, the per-scan measurement indices it
/// was associated with since birth (0 = missed), and its kinematic density.
/// Tracks are immutable and shared between components.
struct Track {
    Label label;
    std::vector<int> history;
    TrackDensity density;
};

using TrackPtr = std::shared_ptr<const Track>;

/// One δ-GLMB term: label set I, log weight ln ω and the track densities
/// p(·, ℓ) for ℓ ∈ I. `labels` is sorted and `tracks[i]->label == labels[i]`.
struct GlmbComponent {
    std::vector<Label> labels;
    double log_weight = 0.0;
    std::vector<TrackPtr> tracks;

    [[nodiscard]] std::size_t cardinality() const { return labels.size(); }
    /// Returns nullptr when the label is not in the component.
    [[nodiscard]] const TrackDensity* density(const Label& label) const;
    /// Checks the sorted/distinct/parallel invariants.
    void validate() const;
};

/// The filter state: a normalized list of δ-GLMB components.
struct GlmbDensity {
    std::vector<GlmbComponent> components;
    int scan_time = 0;

    /// A density holding only the empty label set with weight 1.
    static GlmbDensity empty_set(int scan_time = 0);

    /// Rescales log weights so they sum to one (log-sum-exp).
    void normalize();
    [[nodiscard]] double total_weight() const;
};

/// ln Σ exp(x_i); -inf for an empty range.
[[nodiscard]] double log_sum_exp(std::span<const double> values);

/// ρ(n) = Σ_{|I|=n} ω.
[[nodiscard]] std::map<int, double> cardinality_distribution(const GlmbDensity& density);

struct TrackEstimate {
    Label label;
    Eigen::VectorXd state;
};

/// MAP cardinality n*, then the labels and track means of the heaviest
/// component with |I| = n* (lowest index wins ties).
[[nodiscard]] std::vector<TrackEstimate> estimate_state(const GlmbDensity& density);

}  // namespace glmb
