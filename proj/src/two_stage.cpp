#include "glmb/two_stage.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace glmb {

namespace {

struct PredictedTerm {
    double log_weight;
    std::vector<Label> labels;
    std::vector<const TrackDensity*> densities;
    std::vector<const std::vector<int>*> histories;
    std::vector<const Eigen::VectorXd*> log_psi;
};

using HistoryKey = std::vector<std::pair<Label, std::vector<int>>>;

}  // namespace

GlmbDensity two_stage_oracle(const GlmbDensity& density, const MeasurementSet& measurements, const Models& models,
                             const BackendOptions& backend, std::size_t max_children) {
    const int next = density.scan_time + 1;
    const int M = static_cast<int>(measurements.size());
    const auto& motion = *models.motion;
    const auto& meas = *models.measurement;
    Rng rng(0);
    const std::vector<int> no_history;

    // Birth terms are common to every parent.
    const auto births = motion.births(next);
    std::vector<TrackDensity> birth_dens;
    std::vector<Eigen::VectorXd> birth_psi;
    for (const auto& [label, site] : births) {
        birth_dens.push_back(birth_density(*site, backend, rng));
        birth_psi.push_back(log_psi_bar_row(birth_dens.back(), label, measurements, meas));
    }

    // Prediction: every surviving subset J of I and birth subset L.
    std::vector<PredictedTerm> predicted;
    std::vector<std::unique_ptr<std::pair<TrackDensity, Eigen::VectorXd>>> store;
    for (const auto& comp : density.components) {
        const std::size_t n = comp.labels.size();
        std::vector<double> ps(n);
        std::vector<const std::pair<TrackDensity, Eigen::VectorXd>*> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto p = predict_track(comp.tracks[i]->density, comp.labels[i], motion, rng);
            ps[i] = p.survival;
            auto row = log_psi_bar_row(p.density, comp.labels[i], measurements, meas);
            store.push_back(std::make_unique<std::pair<TrackDensity, Eigen::VectorXd>>(std::move(p.density),
                                                                                       std::move(row)));
            pred[i] = store.back().get();
        }
        const std::size_t nb = births.size();
        if (n + nb >= 20) throw std::length_error("instance too large for the two-stage reference");
        for (std::uint32_t J = 0; J < (1u << n); ++J) {
            for (std::uint32_t L = 0; L < (1u << nb); ++L) {
                PredictedTerm term;
                term.log_weight = comp.log_weight;
                for (std::size_t i = 0; i < n; ++i) {
                    if (J & (1u << i)) {
                        term.log_weight += std::log(ps[i]);
                        term.labels.push_back(comp.labels[i]);
                        term.densities.push_back(&pred[i]->first);
                        term.histories.push_back(&comp.tracks[i]->history);
                        term.log_psi.push_back(&pred[i]->second);
                    } else {
                        term.log_weight += std::log1p(-ps[i]);
                    }
                }
                for (std::size_t b = 0; b < nb; ++b) {
                    const double r = births[b].second->existence;
                    if (L & (1u << b)) {
                        term.log_weight += std::log(r);
                        term.labels.push_back(births[b].first);
                        term.densities.push_back(&birth_dens[b]);
                        term.histories.push_back(&no_history);
                        term.log_psi.push_back(&birth_psi[b]);
                    } else {
                        term.log_weight += std::log1p(-r);
                    }
                }
                predicted.push_back(std::move(term));
            }
        }
    }

    // Update: every positive 1-1 map θ from the predicted labels to {0..M}.
    std::map<HistoryKey, std::size_t> index;
    GlmbDensity out;
    out.scan_time = next;
    std::size_t produced = 0;
    for (const auto& term : predicted) {
        const std::size_t n = term.labels.size();
        std::vector<int> theta(n, 0);
        std::vector<char> taken(static_cast<std::size_t>(M) + 1, 0);
        auto visit = [&](auto&& self, std::size_t i, double lw) -> void {
            if (i == n) {
                if (++produced > max_children) throw std::length_error("too many children for the reference");
                HistoryKey key;
                std::vector<TrackPtr> tracks;
                for (std::size_t k = 0; k < n; ++k) {
                    auto t = std::make_shared<Track>();
                    t->label = term.labels[k];
                    t->history = *term.histories[k];
                    t->history.push_back(theta[k]);
                    t->density = track_posterior(*term.densities[k], term.labels[k], measurements, theta[k], meas,
                                                 rng, backend);
                    key.emplace_back(t->label, t->history);
                    tracks.push_back(std::move(t));
                }
                auto [it, inserted] = index.try_emplace(std::move(key), out.components.size());
                if (inserted) {
                    GlmbComponent c;
                    c.labels = term.labels;
                    c.log_weight = lw;
                    c.tracks = std::move(tracks);
                    out.components.push_back(std::move(c));
                } else {
                    double& acc = out.components[it->second].log_weight;
                    const double mx = std::max(acc, lw);
                    acc = mx + std::log(std::exp(acc - mx) + std::exp(lw - mx));
                }
                return;
            }
            for (int j = 0; j <= M; ++j) {
                if (j >= 1 && taken[static_cast<std::size_t>(j)]) continue;
                theta[i] = j;
                if (j >= 1) taken[static_cast<std::size_t>(j)] = 1;
                self(self, i + 1, lw + (*term.log_psi[i])[j]);
                if (j >= 1) taken[static_cast<std::size_t>(j)] = 0;
            }
        };
        visit(visit, 0, term.log_weight);
    }
    if (out.components.empty()) return GlmbDensity::empty_set(next);
    out.normalize();
    return out;
}

}  // namespace glmb
