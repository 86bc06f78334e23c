#pragma once

#include "glmb/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace glmb {

/// Association problem for one parent component. Row i covers label
/// `label_order[i]`: the first R rows are surviving labels, the rest are
/// birth labels. Column j + 1 of `log_eta` holds ln η_i(j) for
/// j ∈ {-1, 0, 1..M}: -1 is death (or no birth), 0 a missed detection and
/// j >= 1 an association with measurement j.
struct AssociationProblem {
    Eigen::MatrixXd log_eta;
    int R = 0;
    int M = 0;
    std::vector<Label> label_order;

    [[nodiscard]] int P() const { return static_cast<int>(log_eta.rows()); }
    [[nodiscard]] double log_eta_at(int i, int j) const { return log_eta(i, j + 1); }
    [[nodiscard]] double eta(int i, int j) const;

    /// Throws ContractError on shape mismatch or a non-finite ln η.
    void validate() const;
};

/// Vector γ ∈ {-1..M}^P.
struct AssignmentVector {
    std::vector<int> gamma;

    friend bool operator==(const AssignmentVector&, const AssignmentVector&) = default;
    friend auto operator<=>(const AssignmentVector&, const AssignmentVector&) = default;
};

struct AssignmentVectorHash {
    std::size_t operator()(const AssignmentVector& v) const noexcept;
};

/// No two entries share a positive value.
[[nodiscard]] bool is_positive_one_to_one(const std::vector<int>& gamma);

struct Recovered {
    std::vector<Label> labels;
    std::vector<int> associations;
};

/// I₊ = {ℓ_i : γ_i >= 0} with θ₊(ℓ_i) = γ_i, in row order.
[[nodiscard]] Recovered recover(const AssociationProblem& problem, const AssignmentVector& v);

/// Σ ln η_i(γ_i) for positive 1-1 γ, -inf otherwise.
[[nodiscard]] double weight_of(const AssociationProblem& problem, const AssignmentVector& v);

/// Conditional of γ_n given the other entries of `gamma` (entry n is
/// ignored). Index j + 1 of the result holds the probability of j.
[[nodiscard]] std::vector<double> gibbs_conditional(const AssociationProblem& problem, int n,
                                                    const std::vector<int>& gamma);

/// T states of the systematic-scan Gibbs chain, the first being `init`.
[[nodiscard]] std::vector<AssignmentVector> gibbs_sample(const AssociationProblem& problem,
                                                         const AssignmentVector& init, int T, std::uint64_t seed);

/// P × (M + 2P) cost matrix: -ln η_i(j) in column j - 1 for j >= 1,
/// -ln η_i(0) in column M + i, -ln η_i(-1) in column M + P + i and
/// kInfiniteCost elsewhere.
[[nodiscard]] Eigen::MatrixXd build_cost_matrix(const AssociationProblem& problem);

/// Up to T best positive 1-1 vectors in non-increasing weight order.
[[nodiscard]] std::vector<AssignmentVector> murty_ranked(const AssociationProblem& problem, int T);

/// Distinct vectors ordered by weight (ties by lexicographic γ).
[[nodiscard]] std::vector<AssignmentVector> dedup_rank(const std::vector<AssignmentVector>& samples,
                                                       const AssociationProblem& problem);

/// Every positive 1-1 vector; refuses problems with more than `limit` of them.
[[nodiscard]] std::vector<AssignmentVector> enumerate_all(const AssociationProblem& problem,
                                                          std::size_t limit = 100000);

}  // namespace glmb
