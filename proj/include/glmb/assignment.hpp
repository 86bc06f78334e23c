#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace glmb {

/// Entries at or above this value are forbidden pairings.
inline constexpr double kInfiniteCost = 1e30;

struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// shortest augmenting paths with dual potentials. Returns nullopt when
/// forbidden entries leave no complete assignment.
[[nodiscard]] std::optional<Assignment> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace glmb
