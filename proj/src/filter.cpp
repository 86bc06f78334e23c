#include "glmb/filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace glmb {

void FilterConfig::validate() const {
    if (h_max < 1) throw ContractError("h_max must be at least 1");
    if (!(tempering.birth >= 1.0)) throw ContractError("birth tempering factor must be >= 1");
    if (!(tempering.survival > 0.0 && tempering.survival <= 1.0))
        throw ContractError("survival tempering factor must lie in (0,1]");
    if (!(tempering.detection > 0.0 && tempering.detection <= 1.0))
        throw ContractError("detection tempering factor must lie in (0,1]");
    if (!(weight_floor >= 0.0 && weight_floor < 1.0)) throw ContractError("weight floor must lie in [0,1)");
    if (backend.backend == Backend::smc && backend.smc.particles_per_track < 100)
        throw ContractError("particle budget must be at least 100 per track");
}

std::vector<int> multinomial_allocation(const std::vector<double>& weights, int total, Rng& rng) {
    std::vector<int> counts(weights.size(), 0);
    if (weights.empty()) return counts;
    std::vector<double> suffix(weights.size() + 1, 0.0);
    for (std::size_t h = weights.size(); h-- > 0;) suffix[h] = suffix[h + 1] + weights[h];
    int remaining = total;
    for (std::size_t h = 0; h < weights.size() && remaining > 0; ++h) {
        const double p = suffix[h] > 0.0 ? weights[h] / suffix[h] : 0.0;
        if (h + 1 == weights.size() || p >= 1.0) {
            counts[h] = remaining;
        } else if (p > 0.0) {
            std::binomial_distribution<int> bin(remaining, p);
            counts[h] = bin(rng);
        }
        remaining -= counts[h];
    }
    return counts;
}

PredictedComponent predict_density(const GlmbComponent& component, int next_scan, const MotionModel& motion,
                                   Rng& rng, const BackendOptions& backend) {
    PredictedComponent out;
    out.surviving = static_cast<int>(component.cardinality());
    for (std::size_t i = 0; i < component.labels.size(); ++i) {
        auto pred = predict_track(component.tracks[i]->density, component.labels[i], motion, rng);
        if (!(pred.survival > 0.0)) throw ContractError("predicted survival probability is zero");
        out.labels.push_back(component.labels[i]);
        out.existence.push_back(pred.survival);
        out.densities.push_back(std::move(pred.density));
    }
    for (const auto& [label, site] : motion.births(next_scan)) {
        out.labels.push_back(label);
        out.existence.push_back(site->existence);
        out.densities.push_back(birth_density(*site, backend, rng));
    }
    return out;
}

namespace {

double tempered_existence(double e, bool birth, const Tempering& t) {
    return birth ? std::min(e * t.birth, 1.0 - 1e-6) : e * t.survival;
}

}  // namespace

AssociationProblem build_problem(int surviving, const std::vector<Label>& labels, const std::vector<double>& existence,
                                 const std::vector<Eigen::VectorXd>& log_psi_bar, const Tempering& tempering) {
    const int P = static_cast<int>(labels.size());
    if (static_cast<int>(existence.size()) != P || static_cast<int>(log_psi_bar.size()) != P)
        throw ContractError("one existence value and ψ̄ row per label");
    const int M = P == 0 ? 0 : static_cast<int>(log_psi_bar.front().size()) - 1;
    AssociationProblem problem;
    problem.R = surviving;
    problem.M = M;
    problem.label_order = labels;
    problem.log_eta.resize(P, M + 2);
    const bool neutral = tempering.neutral();
    for (int i = 0; i < P; ++i) {
        const auto& row = log_psi_bar[static_cast<std::size_t>(i)];
        if (row.size() != M + 1) throw ContractError("ψ̄ rows differ in length");
        double e = existence[static_cast<std::size_t>(i)];
        if (!(e > 0.0 && e < 1.0)) throw ContractError("existence probability must lie strictly inside (0,1)");
        if (!neutral) e = tempered_existence(e, i >= surviving, tempering);
        const double log_e = std::log(e);
        problem.log_eta(i, 0) = std::log1p(-e);
        double log_miss = row[0];
        if (!neutral && tempering.detection != 1.0) {
            const double detected = -std::expm1(row[0]);
            log_miss = std::log1p(-tempering.detection * detected);
        }
        problem.log_eta(i, 1) = log_e + log_miss;
        const double log_fd = std::log(tempering.detection);
        for (int j = 1; j <= M; ++j) problem.log_eta(i, j + 1) = log_e + row[j] + (neutral ? 0.0 : log_fd);
    }
    problem.validate();
    return problem;
}

AssociationProblem build_problem(const PredictedComponent& predicted, const MeasurementSet& measurements,
                                 const Models& models, const Tempering& tempering) {
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(predicted.labels.size());
    for (std::size_t i = 0; i < predicted.labels.size(); ++i)
        rows.push_back(log_psi_bar_row(predicted.densities[i], predicted.labels[i], measurements,
                                       *models.measurement));
    return build_problem(predicted.surviving, predicted.labels, predicted.existence, rows, tempering);
}

namespace {

// Predicted quantities and lazily built children for one distinct track
// (a parent track or a birth site).
struct Entry {
    Label label;
    bool birth = false;
    const std::vector<int>* history = nullptr;
    double existence = 0.0;
    TrackDensity predicted;
    Eigen::VectorXd log_psi;
    std::vector<TrackPtr> children;
    std::uint64_t stream = 0;
};

struct KeyHash {
    std::size_t operator()(const std::vector<const Track*>& key) const noexcept {
        std::uint64_t h = 0x51ed270b27c5a1e3ULL;
        for (const Track* t : key) h = mix64(h ^ reinterpret_cast<std::uintptr_t>(t));
        return static_cast<std::size_t>(h);
    }
};

struct Child {
    double log_weight;
    std::vector<TrackPtr> tracks;
};

}  // namespace

GlmbDensity joint_step(const GlmbDensity& density, const MeasurementSet& measurements, const Models& models,
                       const FilterConfig& config, StepDiagnostics* diagnostics) {
    config.validate();
    if (density.components.empty()) throw std::invalid_argument("empty GLMB");
    const int next = density.scan_time + 1;
    const auto scan_key = static_cast<std::uint64_t>(next);
    const auto& motion = *models.motion;
    const auto& meas = *models.measurement;
    const int M = static_cast<int>(measurements.size());
    const std::uint64_t seed = config.rng_seed;

    StepDiagnostics diag;
    diag.scan = next;
    diag.parents = static_cast<int>(density.components.size());
    diag.measurements = M;

    std::vector<double> lw;
    for (const auto& c : density.components) lw.push_back(c.log_weight);
    const double parent_total = log_sum_exp(lw);
    if (!std::isfinite(parent_total)) throw NumericalError("GLMB has no finite weight mass");
    std::vector<double> weights;
    for (double w : lw) weights.push_back(std::exp(w - parent_total));

    std::vector<int> counts(weights.size(), 1);
    if (config.solver != Solver::exhaustive) {
        Rng alloc = make_rng(seed, {scan_key, 0});
        counts = multinomial_allocation(weights, config.h_max, alloc);
    }

    std::vector<Entry> entries;
    const auto births = motion.births(next);
    for (std::size_t b = 0; b < births.size(); ++b) {
        Entry e;
        e.label = births[b].first;
        e.birth = true;
        e.existence = births[b].second->existence;
        Rng rng = make_rng(seed, {scan_key, 1, b});
        e.predicted = birth_density(*births[b].second, config.backend, rng);
        e.log_psi = log_psi_bar_row(e.predicted, e.label, measurements, meas);
        e.children.resize(static_cast<std::size_t>(M) + 1);
        e.stream = b;
        entries.push_back(std::move(e));
    }
    std::unordered_map<const Track*, std::size_t> entry_of;
    auto entry_for = [&](const TrackPtr& track) -> std::size_t {
        auto it = entry_of.find(track.get());
        if (it != entry_of.end()) return it->second;
        Entry e;
        e.label = track->label;
        e.history = &track->history;
        e.stream = entries.size();
        Rng rng = make_rng(seed, {scan_key, 2, e.stream});
        auto pred = predict_track(track->density, track->label, motion, rng);
        e.existence = pred.survival;
        e.predicted = std::move(pred.density);
        e.log_psi = log_psi_bar_row(e.predicted, e.label, measurements, meas);
        e.children.resize(static_cast<std::size_t>(M) + 1);
        entries.push_back(std::move(e));
        entry_of.emplace(track.get(), entries.size() - 1);
        return entries.size() - 1;
    };
    auto child_for = [&](std::size_t idx, int j) -> const TrackPtr& {
        Entry& e = entries[idx];
        TrackPtr& slot = e.children[static_cast<std::size_t>(j)];
        if (!slot) {
            Rng rng = make_rng(seed, {scan_key, 3, e.stream, static_cast<std::uint64_t>(j)});
            auto track = std::make_shared<Track>();
            track->label = e.label;
            if (e.history) track->history = *e.history;
            track->history.push_back(j);
            track->density = track_posterior(e.predicted, e.label, measurements, j, meas, rng, config.backend);
            slot = std::move(track);
        }
        return slot;
    };

    std::vector<Child> children;
    std::unordered_map<std::vector<const Track*>, std::size_t, KeyHash> merged;
    std::chrono::steady_clock::duration solver_time{};

    for (std::size_t h = 0; h < density.components.size(); ++h) {
        const int T = counts[h];
        if (T <= 0) continue;
        const auto& parent = density.components[h];
        std::vector<std::size_t> rows;
        for (const auto& t : parent.tracks) rows.push_back(entry_for(t));
        for (std::size_t b = 0; b < births.size(); ++b) rows.push_back(b);

        std::vector<Label> labels;
        std::vector<double> existence;
        std::vector<Eigen::VectorXd> psi;
        for (std::size_t r : rows) {
            labels.push_back(entries[r].label);
            existence.push_back(entries[r].existence);
            psi.push_back(entries[r].log_psi);
        }
        const int R = static_cast<int>(parent.tracks.size());
        const auto problem = build_problem(R, labels, existence, psi);
        const bool tempered = !config.tempering.neutral();
        const auto sampling = tempered ? build_problem(R, labels, existence, psi, config.tempering) : problem;
        diag.max_rows = std::max(diag.max_rows, problem.P());

        const auto start = std::chrono::steady_clock::now();
        std::vector<AssignmentVector> gammas;
        switch (config.solver) {
            case Solver::gibbs: {
                AssignmentVector init{std::vector<int>(static_cast<std::size_t>(problem.P()), 0)};
                if (config.gibbs_init == GibbsInit::optimal) init = murty_ranked(sampling, 1).front();
                const auto samples = gibbs_sample(sampling, init, T, derive_seed(seed, {scan_key, 4, h}));
                gammas = dedup_rank(samples, problem);
                break;
            }
            case Solver::murty:
                gammas = murty_ranked(sampling, T);
                break;
            case Solver::exhaustive:
                gammas = enumerate_all(problem);
                break;
        }
        solver_time += std::chrono::steady_clock::now() - start;

        for (const auto& g : gammas) {
            const double w = parent.log_weight - parent_total + weight_of(problem, g);
            std::vector<const Track*> key;
            std::vector<TrackPtr> tracks;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const int j = g.gamma[i];
                if (j < 0) continue;
                const TrackPtr& t = child_for(rows[i], j);
                key.push_back(t.get());
                tracks.push_back(t);
            }
            auto [it, inserted] = merged.try_emplace(std::move(key), children.size());
            if (inserted) {
                children.push_back({w, std::move(tracks)});
            } else {
                double& acc = children[it->second].log_weight;
                const double mx = std::max(acc, w);
                if (std::isfinite(mx)) acc = mx + std::log(std::exp(acc - mx) + std::exp(w - mx));
            }
        }
    }
    diag.solver_seconds = std::chrono::duration<double>(solver_time).count();

    std::vector<double> child_lw;
    for (const auto& c : children) child_lw.push_back(c.log_weight);
    const double total = log_sum_exp(child_lw);

    GlmbDensity out;
    out.scan_time = next;
    if (std::isfinite(total)) {
        const double log_floor = config.weight_floor > 0.0 ? std::log(config.weight_floor)
                                                           : -std::numeric_limits<double>::infinity();
        for (auto& c : children) {
            if (c.log_weight - total < log_floor) continue;
            GlmbComponent comp;
            comp.log_weight = c.log_weight;
            comp.tracks = std::move(c.tracks);
            for (const auto& t : comp.tracks) comp.labels.push_back(t->label);
            out.components.push_back(std::move(comp));
        }
    }
    if (out.components.empty()) {
        out = GlmbDensity::empty_set(next);
        diag.degenerate = true;
        diag.log_captured_mass = -std::numeric_limits<double>::infinity();
    } else {
        diag.log_captured_mass = total;
        out.normalize();
    }
    double sq = 0.0;
    for (const auto& c : out.components) sq += std::exp(2.0 * c.log_weight);
    diag.weight_ess = 1.0 / sq;
    diag.children = static_cast<int>(out.components.size());
    if (diagnostics) *diagnostics = diag;
    return out;
}

}  // namespace glmb
