#include "glmb/association.hpp"

#include "glmb/assignment.hpp"
#include "glmb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

namespace glmb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Draws an index from unnormalized masses by a linear CDF scan.
int draw(const std::vector<double>& mass, double total, Rng& rng) {
    const double u = uniform01(rng) * total;
    double cum = 0.0;
    int last = 0;
    for (std::size_t k = 0; k < mass.size(); ++k) {
        if (mass[k] <= 0.0) continue;
        cum += mass[k];
        last = static_cast<int>(k);
        if (u < cum) return last;
    }
    return last;
}

using RowTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// True when measurement j is taken by an entry other than n. A full scan of
// γ per column keeps the O(PM) cost of one conditional.
bool taken_elsewhere(const std::vector<int>& gamma, int n, int j) {
    int hits = 0;
    for (const int g : gamma) hits += g == j ? 1 : 0;
    return hits > (gamma[static_cast<std::size_t>(n)] == j ? 1 : 0);
}

// Unnormalized conditional masses; returns the total. `scaled` holds
// exp(ln η - row max), `log_row` the raw ln η row.
double conditional_mass(const RowTable& scaled, const AssociationProblem& problem, int n,
                        const std::vector<int>& gamma, std::vector<double>& mass) {
    const int cols = problem.M + 2;
    mass.resize(static_cast<std::size_t>(cols));
    double total = 0.0;
    for (int c = 0; c < cols; ++c) {
        const int j = c - 1;
        const bool blocked = j >= 1 && taken_elsewhere(gamma, n, j);
        mass[static_cast<std::size_t>(c)] = blocked ? 0.0 : scaled(n, c);
        total += mass[static_cast<std::size_t>(c)];
    }
    if (total > 0.0 && std::isfinite(total)) return total;
    // Row scaling underflowed every admissible entry: rescale over the
    // admissible set in the log domain.
    double best = kNegInf;
    for (int c = 0; c < cols; ++c) {
        const int j = c - 1;
        if (j >= 1 && taken_elsewhere(gamma, n, j)) continue;
        best = std::max(best, problem.log_eta(n, c));
    }
    total = 0.0;
    for (int c = 0; c < cols; ++c) {
        const int j = c - 1;
        const bool blocked = j >= 1 && taken_elsewhere(gamma, n, j);
        mass[static_cast<std::size_t>(c)] = blocked ? 0.0 : std::exp(problem.log_eta(n, c) - best);
        total += mass[static_cast<std::size_t>(c)];
    }
    return total;
}

RowTable row_scaled(const AssociationProblem& problem) {
    RowTable scaled(problem.log_eta.rows(), problem.log_eta.cols());
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
        const double mx = problem.log_eta.row(i).maxCoeff();
        scaled.row(i) = (problem.log_eta.row(i).array() - mx).exp();
    }
    return scaled;
}

}  // namespace

double AssociationProblem::eta(int i, int j) const {
    return std::exp(log_eta_at(i, j));
}

void AssociationProblem::validate() const {
    if (log_eta.cols() != M + 2) throw ContractError("η table must have M + 2 columns");
    if (R < 0 || R > P()) throw ContractError("surviving row count out of range");
    if (static_cast<int>(label_order.size()) != P()) throw ContractError("one label per η row");
    if (!log_eta.allFinite()) throw ContractError("η entries must be strictly positive and finite");
}

std::size_t AssignmentVectorHash::operator()(const AssignmentVector& v) const noexcept {
    const std::string_view bytes(reinterpret_cast<const char*>(v.gamma.data()), v.gamma.size() * sizeof(int));
    return std::hash<std::string_view>{}(bytes);
}

bool is_positive_one_to_one(const std::vector<int>& gamma) {
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (gamma[i] <= 0) continue;
        for (std::size_t k = i + 1; k < gamma.size(); ++k)
            if (gamma[k] == gamma[i]) return false;
    }
    return true;
}

Recovered recover(const AssociationProblem& problem, const AssignmentVector& v) {
    if (static_cast<int>(v.gamma.size()) != problem.P()) throw ContractError("γ length differs from P");
    if (!is_positive_one_to_one(v.gamma)) throw ContractError("γ is not positive 1-1");
    Recovered out;
    for (int i = 0; i < problem.P(); ++i) {
        const int j = v.gamma[static_cast<std::size_t>(i)];
        if (j < -1 || j > problem.M) throw ContractError("γ entry outside {-1..M}");
        if (j < 0) continue;
        out.labels.push_back(problem.label_order[static_cast<std::size_t>(i)]);
        out.associations.push_back(j);
    }
    return out;
}

double weight_of(const AssociationProblem& problem, const AssignmentVector& v) {
    if (static_cast<int>(v.gamma.size()) != problem.P()) throw ContractError("γ length differs from P");
    if (!is_positive_one_to_one(v.gamma)) return kNegInf;
    double w = 0.0;
    for (int i = 0; i < problem.P(); ++i) {
        const int j = v.gamma[static_cast<std::size_t>(i)];
        if (j < -1 || j > problem.M) throw ContractError("γ entry outside {-1..M}");
        w += problem.log_eta_at(i, j);
    }
    return w;
}

std::vector<double> gibbs_conditional(const AssociationProblem& problem, int n, const std::vector<int>& gamma) {
    if (n < 0 || n >= problem.P()) throw std::out_of_range("row index outside {0..P-1}");
    if (static_cast<int>(gamma.size()) != problem.P()) throw ContractError("γ length differs from P");
    std::vector<double> mass;
    const double total = conditional_mass(row_scaled(problem), problem, n, gamma, mass);
    for (double& m : mass) m /= total;
    return mass;
}

std::vector<AssignmentVector> gibbs_sample(const AssociationProblem& problem, const AssignmentVector& init, int T,
                                           std::uint64_t seed) {
    if (T < 1) throw std::invalid_argument("Gibbs sample count must be at least 1");
    if (static_cast<int>(init.gamma.size()) != problem.P()) throw ContractError("γ length differs from P");
    if (!is_positive_one_to_one(init.gamma)) throw ContractError("initial γ is not positive 1-1");
    const RowTable scaled = row_scaled(problem);
    Rng rng(seed);
    std::vector<AssignmentVector> out;
    out.reserve(static_cast<std::size_t>(T));
    out.push_back(init);
    std::vector<int> gamma = init.gamma;
    std::vector<double> mass;
    for (int t = 1; t < T; ++t) {
        for (int n = 0; n < problem.P(); ++n) {
            const double total = conditional_mass(scaled, problem, n, gamma, mass);
            gamma[static_cast<std::size_t>(n)] = draw(mass, total, rng) - 1;
        }
        out.push_back(AssignmentVector{gamma});
    }
    return out;
}

Eigen::MatrixXd build_cost_matrix(const AssociationProblem& problem) {
    const int P = problem.P();
    const int M = problem.M;
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(P, M + 2 * P, kInfiniteCost);
    for (int i = 0; i < P; ++i) {
        for (int j = 1; j <= M; ++j) C(i, j - 1) = -problem.log_eta_at(i, j);
        C(i, M + i) = -problem.log_eta_at(i, 0);
        C(i, M + P + i) = -problem.log_eta_at(i, -1);
    }
    return C;
}

namespace {

struct MurtyNode {
    double cost = 0.0;
    std::uint64_t seq = 0;
    std::vector<int> solution;
    std::vector<int> forced;                   // column per row, -1 when free
    std::vector<std::pair<int, int>> banned;  // (row, col)
};

struct NodeOrder {
    bool operator()(const MurtyNode& a, const MurtyNode& b) const {
        if (a.cost != b.cost) return a.cost > b.cost;
        return a.seq > b.seq;
    }
};

// Solves the subproblem with forced rows fixed and banned pairs removed.
std::optional<std::pair<std::vector<int>, double>> solve_constrained(const Eigen::MatrixXd& C,
                                                                     const std::vector<int>& forced,
                                                                     const std::vector<std::pair<int, int>>& banned) {
    const int P = static_cast<int>(C.rows());
    const int N = static_cast<int>(C.cols());
    std::vector<int> free_rows;
    std::vector<char> col_used(static_cast<std::size_t>(N), 0);
    double fixed_cost = 0.0;
    for (int i = 0; i < P; ++i) {
        const int c = forced[static_cast<std::size_t>(i)];
        if (c < 0) {
            free_rows.push_back(i);
        } else {
            col_used[static_cast<std::size_t>(c)] = 1;
            fixed_cost += C(i, c);
        }
    }
    std::vector<int> free_cols;
    std::vector<int> col_pos(static_cast<std::size_t>(N), -1);
    for (int c = 0; c < N; ++c) {
        if (col_used[static_cast<std::size_t>(c)]) continue;
        col_pos[static_cast<std::size_t>(c)] = static_cast<int>(free_cols.size());
        free_cols.push_back(c);
    }
    std::vector<int> row_pos(static_cast<std::size_t>(P), -1);
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(free_rows.size()), static_cast<Eigen::Index>(free_cols.size()));
    for (std::size_t r = 0; r < free_rows.size(); ++r) {
        row_pos[static_cast<std::size_t>(free_rows[r])] = static_cast<int>(r);
        for (std::size_t c = 0; c < free_cols.size(); ++c)
            sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = C(free_rows[r], free_cols[c]);
    }
    for (const auto& [r, c] : banned) {
        const int rp = row_pos[static_cast<std::size_t>(r)];
        const int cp = col_pos[static_cast<std::size_t>(c)];
        if (rp >= 0 && cp >= 0) sub(rp, cp) = kInfiniteCost;
    }
    const auto sol = solve_assignment(sub);
    if (!sol) return std::nullopt;
    std::vector<int> full = forced;
    for (std::size_t r = 0; r < free_rows.size(); ++r)
        full[static_cast<std::size_t>(free_rows[r])] = free_cols[static_cast<std::size_t>(sol->row_to_col[r])];
    return std::make_pair(std::move(full), fixed_cost + sol->cost);
}

AssignmentVector decode(const std::vector<int>& row_to_col, int P, int M) {
    AssignmentVector v;
    v.gamma.resize(static_cast<std::size_t>(P));
    for (int i = 0; i < P; ++i) {
        const int c = row_to_col[static_cast<std::size_t>(i)];
        v.gamma[static_cast<std::size_t>(i)] = c < M ? c + 1 : (c < M + P ? 0 : -1);
    }
    return v;
}

}  // namespace

std::vector<AssignmentVector> murty_ranked(const AssociationProblem& problem, int T) {
    if (T < 1) throw std::invalid_argument("ranked assignment count must be at least 1");
    const int P = problem.P();
    if (P == 0) return {AssignmentVector{}};
    const Eigen::MatrixXd C = build_cost_matrix(problem);
    std::priority_queue<MurtyNode, std::vector<MurtyNode>, NodeOrder> queue;
    std::uint64_t seq = 0;
    {
        MurtyNode root;
        root.forced.assign(static_cast<std::size_t>(P), -1);
        auto sol = solve_constrained(C, root.forced, root.banned);
        if (!sol) return {};
        root.solution = std::move(sol->first);
        root.cost = sol->second;
        root.seq = seq++;
        queue.push(std::move(root));
    }
    std::vector<AssignmentVector> out;
    while (!queue.empty() && static_cast<int>(out.size()) < T) {
        MurtyNode node = queue.top();
        queue.pop();
        out.push_back(decode(node.solution, P, problem.M));
        if (static_cast<int>(out.size()) == T) break;
        std::vector<int> forced = node.forced;
        for (int i = 0; i < P; ++i) {
            if (node.forced[static_cast<std::size_t>(i)] >= 0) continue;
            const int col = node.solution[static_cast<std::size_t>(i)];
            MurtyNode child;
            child.forced = forced;
            child.banned = node.banned;
            child.banned.emplace_back(i, col);
            auto sol = solve_constrained(C, child.forced, child.banned);
            if (sol) {
                child.solution = std::move(sol->first);
                child.cost = sol->second;
                child.seq = seq++;
                queue.push(std::move(child));
            }
            forced[static_cast<std::size_t>(i)] = col;
        }
    }
    return out;
}

std::vector<AssignmentVector> dedup_rank(const std::vector<AssignmentVector>& samples,
                                         const AssociationProblem& problem) {
    std::unordered_set<AssignmentVector, AssignmentVectorHash> seen;
    std::vector<std::pair<double, const AssignmentVector*>> ranked;
    for (const auto& s : samples)
        if (seen.insert(s).second) ranked.emplace_back(weight_of(problem, s), &s);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return *a.second < *b.second;
    });
    std::vector<AssignmentVector> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(*r.second);
    return out;
}

std::vector<AssignmentVector> enumerate_all(const AssociationProblem& problem, std::size_t limit) {
    const int P = problem.P();
    const int M = problem.M;
    std::vector<AssignmentVector> out;
    std::vector<int> gamma(static_cast<std::size_t>(P), -1);
    std::vector<char> taken(static_cast<std::size_t>(M) + 1, 0);
    auto rec = [&](auto&& self, int i) -> void {
        if (i == P) {
            if (out.size() >= limit) throw std::length_error("association problem too large to enumerate");
            out.push_back(AssignmentVector{gamma});
            return;
        }
        for (int j = -1; j <= M; ++j) {
            if (j >= 1 && taken[static_cast<std::size_t>(j)]) continue;
            gamma[static_cast<std::size_t>(i)] = j;
            if (j >= 1) taken[static_cast<std::size_t>(j)] = 1;
            self(self, i + 1);
            if (j >= 1) taken[static_cast<std::size_t>(j)] = 0;
        }
    };
    rec(rec, 0);
    return out;
}

}  // namespace glmb
