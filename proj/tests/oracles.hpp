#pragma once

// Brute-force reference computations shared by the tests. They deliberately
// avoid the library's own helpers (log-sum-exp, masking, assignment).

#include "glmb/association.hpp"
#include "glmb/rng.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

/// Every vector in {-1..M}^P, positive 1-1 or not.
inline std::vector<std::vector<int>> all_vectors(int P, int M) {
    std::vector<std::vector<int>> out;
    std::vector<int> g(static_cast<std::size_t>(P), -1);
    while (true) {
        out.push_back(g);
        int i = 0;
        while (i < P && g[static_cast<std::size_t>(i)] == M) g[static_cast<std::size_t>(i++)] = -1;
        if (i == P) break;
        ++g[static_cast<std::size_t>(i)];
    }
    return out;
}

/// Positive 1-1 by counting occurrences of each positive value.
inline bool one_to_one(const std::vector<int>& g) {
    std::map<int, int> count;
    for (int v : g)
        if (v > 0 && ++count[v] > 1) return false;
    return true;
}

/// ∏ η_i(γ_i) in extended precision, 0 for vectors that are not 1-1.
inline long double product_weight(const glmb::AssociationProblem& p, const std::vector<int>& g) {
    if (!one_to_one(g)) return 0.0L;
    long double w = 1.0L;
    for (std::size_t i = 0; i < g.size(); ++i)
        w *= std::exp(static_cast<long double>(p.log_eta(static_cast<Eigen::Index>(i), g[i] + 1)));
    return w;
}

/// η table with entries uniform on (lo, hi).
inline glmb::AssociationProblem random_problem(int P, int M, glmb::Rng& rng, double lo = 0.05, double hi = 1.0) {
    glmb::AssociationProblem p;
    p.R = P;
    p.M = M;
    p.log_eta.resize(P, M + 2);
    for (int i = 0; i < P; ++i) {
        p.label_order.push_back(glmb::Label{0, i + 1});
        for (int c = 0; c < M + 2; ++c) p.log_eta(i, c) = std::log(lo + (hi - lo) * glmb::uniform01(rng));
    }
    return p;
}

/// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace oracle
