#include "glmb/cli.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace glmb::cli {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

std::vector<std::string> state_names(const ScenarioSpec& spec) {
    std::vector<std::string> names{"px", "vx", "py", "vy"};
    if (spec.state_dim() == 5) names.emplace_back("omega");
    return names;
}

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

std::vector<std::string> tracks_columns(const ScenarioSpec& spec) {
    std::vector<std::string> cols{"scan", "label_birth_time", "label_index"};
    for (auto& n : state_names(spec)) cols.push_back(n);
    return cols;
}

std::vector<std::string> truth_columns(const ScenarioSpec& spec) {
    std::vector<std::string> cols{"scan", "object", "label_birth_time", "label_index"};
    for (auto& n : state_names(spec)) cols.push_back(n);
    return cols;
}

std::vector<std::string> measurement_columns(const ScenarioSpec& spec) {
    if (spec.state_dim() == 5) return {"scan", "origin", "bearing", "range"};
    return {"scan", "origin", "x", "y"};
}

std::vector<std::string> ospa_columns() {
    return {"scan", "ospa", "localization", "cardinality"};
}

std::vector<std::string> cardinality_columns() {
    return {"scan", "true_n", "estimated_n"};
}

void write_simulation(const ScenarioSpec& spec, const Simulation& sim, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto truth = open_out(dir / "truth.csv");
    write_header(truth, truth_columns(spec));
    for (std::size_t k = 0; k < sim.truth.size(); ++k) {
        for (const auto& t : sim.truth[k]) {
            truth << k + 1 << ',' << t.object << ',' << t.label.birth_time << ',' << t.label.index;
            for (Eigen::Index d = 0; d < t.state.size(); ++d) truth << ',' << fmt(t.state[d]);
            truth << '\n';
        }
    }
    auto meas = open_out(dir / "measurements.csv");
    write_header(meas, measurement_columns(spec));
    for (std::size_t k = 0; k < sim.measurements.size(); ++k) {
        for (std::size_t m = 0; m < sim.measurements[k].size(); ++m) {
            meas << k + 1 << ',' << sim.origins[k][m];
            for (Eigen::Index d = 0; d < sim.measurements[k][m].size(); ++d) meas << ',' << fmt(sim.measurements[k][m][d]);
            meas << '\n';
        }
    }
}

AssociationProblem parse_eta_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line + ",");
        std::string cell;
        int bad = 0;
        int cells = 0;
        while (std::getline(ss, cell, ',')) {
            ++cells;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                ++bad;
                continue;
            }
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size()) {
                ++bad;
                continue;
            }
            row.push_back(v);
        }
        if (bad > 0) {
            // A first row with no numeric cell at all is a header.
            if (!seen_data && bad == cells) {
                seen_data = true;
                continue;
            }
            throw UsageError("line " + std::to_string(line_no) + ": non-numeric value");
        }
        seen_data = true;
        if (row.size() < 2) throw UsageError("line " + std::to_string(line_no) + ": need at least 2 columns");
        if (!rows.empty() && row.size() != rows.front().size())
            throw UsageError("line " + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                             " columns, found " + std::to_string(row.size()));
        for (double v : row)
            if (!(v > 0.0) || !std::isfinite(v))
                throw UsageError("line " + std::to_string(line_no) + ": η entries must be positive and finite");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw UsageError("line " + std::to_string(line_no) + ": no η rows found");
    AssociationProblem problem;
    const auto P = static_cast<Eigen::Index>(rows.size());
    const auto cols = static_cast<Eigen::Index>(rows.front().size());
    problem.M = static_cast<int>(cols) - 2;
    problem.R = static_cast<int>(P);
    problem.log_eta.resize(P, cols);
    for (Eigen::Index i = 0; i < P; ++i) {
        problem.label_order.push_back(Label{0, static_cast<int>(i) + 1});
        for (Eigen::Index c = 0; c < cols; ++c)
            problem.log_eta(i, c) = std::log(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
    }
    return problem;
}

std::vector<RankedAssignment> assign(const AssociationProblem& problem, int T, const std::string& solver,
                                     std::uint64_t seed) {
    if (T < 1) throw UsageError("-T must be at least 1");
    std::vector<AssignmentVector> ranked;
    if (solver == "murty") {
        ranked = murty_ranked(problem, T);
    } else if (solver == "gibbs") {
        AssignmentVector init{std::vector<int>(static_cast<std::size_t>(problem.P()), 0)};
        ranked = dedup_rank(gibbs_sample(problem, init, T, seed), problem);
    } else {
        throw UsageError("unknown solver '" + solver + "'");
    }
    std::vector<RankedAssignment> out;
    for (auto& g : ranked) {
        const double w = weight_of(problem, g);
        out.push_back({std::move(g), w});
    }
    return out;
}

void write_assignments_csv(const std::vector<RankedAssignment>& ranked, int P, std::ostream& out) {
    out << "rank";
    for (int i = 1; i <= P; ++i) out << ",gamma_" << i;
    out << ",log_weight\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        out << r + 1;
        for (int g : ranked[r].gamma.gamma) out << ',' << g;
        out << ',' << fmt(ranked[r].log_weight) << '\n';
    }
}

}  // namespace glmb::cli
