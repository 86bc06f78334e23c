#include "glmb/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace glmb::cli {

AssociationProblem random_problem(int P, int M, std::uint64_t seed) {
    Rng rng(seed);
    AssociationProblem problem;
    problem.R = P;
    problem.M = M;
    problem.log_eta.resize(P, M + 2);
    for (int i = 0; i < P; ++i) {
        problem.label_order.push_back(Label{0, i + 1});
        for (int c = 0; c < M + 2; ++c) problem.log_eta(i, c) = -6.0 * uniform01(rng);
    }
    return problem;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

template <class F>
double best_time(int repeats, F&& f) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
}

BenchPoint measure(int P, int M, int gibbs_T, int murty_T, const BenchConfig& cfg) {
    const auto problem = random_problem(P, M, derive_seed(cfg.seed, {static_cast<std::uint64_t>(P),
                                                                     static_cast<std::uint64_t>(M)}));
    const AssignmentVector init{std::vector<int>(static_cast<std::size_t>(P), 0)};
    BenchPoint pt;
    pt.P = P;
    pt.M = M;
    std::size_t sink = 0;
    pt.gibbs_seconds = best_time(cfg.repeats, [&] { sink += gibbs_sample(problem, init, gibbs_T, cfg.seed).size(); });
    if (murty_T > 0)
        pt.murty_seconds = best_time(cfg.repeats, [&] { sink += murty_ranked(problem, murty_T).size(); });
    if (sink == 0) pt.gibbs_seconds = -1.0;
    return pt;
}

}  // namespace

BenchReport bench_scaling(const BenchConfig& cfg) {
    BenchReport report;
    const int murty_T = cfg.sweep_murty ? cfg.murty_solutions : 0;
    std::vector<double> xm, ym, xp, yp, xs, ys;
    for (int M : cfg.m_values) {
        auto pt = measure(cfg.fixed_p, M, cfg.gibbs_samples, murty_T, cfg);
        xm.push_back(M);
        ym.push_back(pt.gibbs_seconds);
        if (pt.murty_seconds > 0) {
            xs.push_back(2.0 * pt.P + pt.M);
            ys.push_back(pt.murty_seconds);
        }
        report.m_sweep.push_back(pt);
    }
    for (int P : cfg.p_values) {
        auto pt = measure(P, cfg.fixed_m, cfg.gibbs_samples, murty_T, cfg);
        xp.push_back(P);
        yp.push_back(pt.gibbs_seconds);
        if (pt.murty_seconds > 0) {
            xs.push_back(2.0 * pt.P + pt.M);
            ys.push_back(pt.murty_seconds);
        }
        report.p_sweep.push_back(pt);
    }
    report.gibbs_slope_m = loglog_slope(xm, ym);
    report.gibbs_slope_p = loglog_slope(xp, yp);
    report.murty_slope_size = xs.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
    report.compare_samples = cfg.compare_samples;
    report.comparison = measure(cfg.compare_p, cfg.compare_m, cfg.compare_samples, cfg.compare_samples, cfg);
    return report;
}

std::string bench_to_json(const BenchReport& report) {
    using json = nlohmann::json;
    auto points = [](const std::vector<BenchPoint>& pts) {
        json arr = json::array();
        for (const auto& p : pts)
            arr.push_back({{"P", p.P}, {"M", p.M}, {"gibbs_seconds", p.gibbs_seconds}, {"murty_seconds", p.murty_seconds}});
        return arr;
    };
    json doc{{"schema_version", kSchemaVersion},
             {"m_sweep", points(report.m_sweep)},
             {"p_sweep", points(report.p_sweep)},
             {"gibbs_slope_m", report.gibbs_slope_m},
             {"gibbs_slope_p", report.gibbs_slope_p},
             {"murty_slope_size", report.murty_slope_size},
             {"comparison",
              {{"P", report.comparison.P},
               {"M", report.comparison.M},
               {"T", report.compare_samples},
               {"gibbs_seconds", report.comparison.gibbs_seconds},
               {"murty_seconds", report.comparison.murty_seconds},
               {"speedup", report.comparison.murty_seconds / report.comparison.gibbs_seconds}}}};
    return doc.dump(1) + "\n";
}

void print_bench(const BenchReport& report, std::ostream& out) {
    auto table = [&](const char* title, const std::vector<BenchPoint>& pts) {
        out << title << "\n    P      M   gibbs_s    murty_s\n";
        for (const auto& p : pts) {
            char line[96];
            std::snprintf(line, sizeof line, "%5d %6d %9.5f %10.5f\n", p.P, p.M, p.gibbs_seconds, p.murty_seconds);
            out << line;
        }
    };
    table("sweep over M", report.m_sweep);
    table("sweep over P", report.p_sweep);
    out << "gibbs log-log slope in M: " << fmt(report.gibbs_slope_m) << '\n'
        << "gibbs log-log slope in P: " << fmt(report.gibbs_slope_p) << '\n'
        << "murty log-log slope in 2P+M: " << fmt(report.murty_slope_size) << '\n'
        << "P=" << report.comparison.P << " M=" << report.comparison.M << " T=" << report.compare_samples
        << ": gibbs " << fmt(report.comparison.gibbs_seconds) << " s, murty " << fmt(report.comparison.murty_seconds)
        << " s, speedup " << fmt(report.comparison.murty_seconds / report.comparison.gibbs_seconds) << "x\n";
}

}  // namespace glmb::cli
