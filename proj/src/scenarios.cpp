#include "glmb/scenarios.hpp"

#include "glmb/assignment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace glmb {

namespace {

using json = nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

std::vector<BirthSite> make_births(const std::vector<BirthSiteParams>& params) {
    std::vector<BirthSite> out;
    for (const auto& b : params) {
        const Eigen::MatrixXd cov = b.stddev.array().square().matrix().asDiagonal();
        out.push_back({b.existence, GaussianMixture::single(b.mean, cov)});
    }
    return out;
}

void add_object(ScenarioSpec& spec, int spawn, int death, Eigen::VectorXd initial) {
    const int id = static_cast<int>(spec.objects.size()) + 1;
    spec.objects.push_back({Label{spawn, id}, spawn, death, std::move(initial)});
}

}  // namespace

Models ScenarioSpec::build_models() const {
    if (const auto* p = std::get_if<LinearParams>(&params)) {
        const auto cv = constant_velocity(p->dt, p->sigma_v);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 4);
        H(0, 0) = 1.0;
        H(1, 2) = 1.0;
        const Eigen::MatrixXd R = p->sigma_obs * p->sigma_obs * Eigen::MatrixXd::Identity(2, 2);
        const Eigen::Vector2d lo = Eigen::Vector2d::Constant(-p->half_width);
        const Eigen::Vector2d hi = Eigen::Vector2d::Constant(p->half_width);
        return {std::make_shared<LinearGaussianMotion>(cv.F, cv.Q, p->survival, make_births(p->births)),
                std::make_shared<LinearGaussianMeasurement>(H, R, p->detection, p->clutter, lo, hi)};
    }
    const auto& p = std::get<NonlinearParams>(params);
    return {std::make_shared<CoordinatedTurnMotion>(p.dt, p.sigma_accel, p.sigma_turn, p.survival,
                                                    make_births(p.births)),
            std::make_shared<RangeBearingMeasurement>(p.sigma_bearing, p.sigma_range, p.radius, p.clutter, p.pd_peak,
                                                      p.pd_edge)};
}

void ScenarioSpec::scale_clutter(double factor) {
    if (!(factor > 0.0)) throw ContractError("clutter scale must be positive");
    std::visit([factor](auto& p) { p.clutter *= factor; }, params);
}

int ScenarioSpec::state_dim() const {
    return std::holds_alternative<LinearParams>(params) ? 4 : 5;
}

void ScenarioSpec::validate() const {
    if (duration < 1) throw ContractError("scenario duration must be positive");
    const int dim = state_dim();
    for (const auto& o : objects) {
        if (o.death <= o.spawn) throw ContractError("truth object dies before it spawns");
        if (o.spawn < 1) throw ContractError("truth objects spawn at scan 1 or later");
        if (o.initial.size() != dim) throw ContractError("truth state has the wrong dimension");
    }
    const auto& births = std::visit([](const auto& p) -> const std::vector<BirthSiteParams>& { return p.births; },
                                    params);
    if (births.empty()) throw ContractError("scenario needs at least one birth site");
    for (const auto& b : births)
        if (b.mean.size() != dim || b.stddev.size() != dim) throw ContractError("birth site has the wrong dimension");
    (void)build_models();
}

ScenarioSpec linear_scenario() {
    ScenarioSpec spec;
    spec.name = "linear";
    LinearParams p;
    const Eigen::VectorXd sd = vec({10, 10, 10, 10});
    p.births = {{0.04, vec({0, 0, 100, 0}), sd}, {0.04, vec({-100, 0, -100, 0}), sd}, {0.04, vec({100, 0, -100, 0}), sd}};
    spec.params = p;
    spec.tempering = {10.0, 0.95, 0.95};

    const Eigen::Vector2d s1(0, 100), s2(-100, -100), s3(100, -100);
    auto at = [](const Eigen::Vector2d& s, double vx, double vy) { return vec({s.x(), vx, s.y(), vy}); };
    add_object(spec, 1, 71, at(s1, 0, 8));
    add_object(spec, 1, 101, at(s2, -8, -4));
    add_object(spec, 1, 101, at(s3, 8, -4));
    add_object(spec, 20, 101, at(s2, 6, 6));
    add_object(spec, 20, 81, at(s3, -6, 6));
    add_object(spec, 40, 101, at(s1, -9, 3));
    add_object(spec, 40, 101, at(s2, 9, -3));
    add_object(spec, 60, 101, at(s3, 0, -9));
    add_object(spec, 60, 101, at(s1, 9, 3));
    add_object(spec, 75, 101, at(s2, -3, 9));
    return spec;
}

ScenarioSpec nonlinear_scenario() {
    ScenarioSpec spec;
    spec.name = "nonlinear";
    NonlinearParams p;
    p.sigma_turn = kDeg;
    p.sigma_bearing = kDeg;
    const Eigen::VectorXd sd = vec({50, 50, 50, 50, 6 * kDeg});
    p.births = {{0.02, vec({-1500, 0, 250, 0, 0}), sd},
                {0.02, vec({-250, 0, 1000, 0, 0}), sd},
                {0.03, vec({250, 0, 750, 0, 0}), sd},
                {0.03, vec({1000, 0, 1500, 0, 0}), sd}};
    spec.params = p;
    spec.tempering = {20.0, 0.95, 0.95};

    const double w = 2.0 * kDeg;
    add_object(spec, 1, 102, vec({1000 + 3.8676, -10, 1500 - 11.7457, -10, w / 8}));
    add_object(spec, 10, 102, vec({-250 - 5.8857, 20, 1000 + 11.4102, 3, -w / 3}));
    add_object(spec, 10, 102, vec({-1500 - 7.3806, 11, 250 + 6.7993, 10, -w / 2}));
    add_object(spec, 10, 67, vec({-1500, 43, 250, 0, 0}));
    add_object(spec, 20, 81, vec({250 - 3.8676, 11, 750 - 11.0747, 5, w / 4}));
    add_object(spec, 40, 102, vec({-250 + 7.3806, -12, 1000 - 6.7993, -12, w / 2}));
    add_object(spec, 40, 102, vec({1000, 0, 1500, -10, w / 4}));
    add_object(spec, 40, 81, vec({250, -50, 750, 0, -w / 4}));
    add_object(spec, 60, 102, vec({1000, -50, 1500, 0, -w / 4}));
    add_object(spec, 60, 102, vec({250, -40, 750, 25, w / 4}));
    return spec;
}

std::vector<std::vector<TruthState>> truth_tracks(const ScenarioSpec& spec) {
    const auto models = spec.build_models();
    std::vector<std::vector<TruthState>> truth(static_cast<std::size_t>(spec.duration));
    for (std::size_t o = 0; o < spec.objects.size(); ++o) {
        const auto& obj = spec.objects[o];
        Eigen::VectorXd x = obj.initial;
        for (int k = obj.spawn; k < obj.death && k <= spec.duration; ++k) {
            if (k > obj.spawn) x = models.motion->propagate_mean(x);
            truth[static_cast<std::size_t>(k - 1)].push_back({static_cast<int>(o), obj.label, x});
        }
    }
    return truth;
}

Simulation simulate(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto models = spec.build_models();
    const auto& meas = *models.measurement;
    Simulation sim;
    sim.truth = truth_tracks(spec);
    for (int k = 1; k <= spec.duration; ++k) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(k)});
        std::vector<std::pair<Measurement, int>> scan;
        for (const auto& t : sim.truth[static_cast<std::size_t>(k - 1)]) {
            if (uniform01(rng) < meas.detection_prob(t.state, t.label)) scan.emplace_back(meas.sample(t.state, rng), t.object);
        }
        std::poisson_distribution<int> count(meas.expected_clutter());
        const int n_clutter = count(rng);
        for (int c = 0; c < n_clutter; ++c) scan.emplace_back(meas.sample_clutter(rng), -1);
        std::shuffle(scan.begin(), scan.end(), rng);
        MeasurementSet z;
        std::vector<int> origin;
        for (auto& [m, o] : scan) {
            z.push_back(std::move(m));
            origin.push_back(o);
        }
        sim.measurements.push_back(std::move(z));
        sim.origins.push_back(std::move(origin));
    }
    return sim;
}

OspaResult ospa(const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& y,
                const OspaParams& params) {
    if (!(params.cutoff > 0.0) || !(params.order >= 1.0)) throw ContractError("OSPA needs c > 0 and p >= 1");
    const auto& small = x.size() <= y.size() ? x : y;
    const auto& large = x.size() <= y.size() ? y : x;
    const auto m = small.size();
    const auto n = large.size();
    OspaResult out;
    if (n == 0) return out;
    const double c = params.cutoff;
    const double p = params.order;
    double loc = 0.0;
    if (m > 0) {
        Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::pow(std::min((small[i] - large[j]).norm(), c), p);
        loc = solve_assignment(cost)->cost;
    }
    const double card = std::pow(c, p) * static_cast<double>(n - m);
    const auto nn = static_cast<double>(n);
    out.total = std::pow((loc + card) / nn, 1.0 / p);
    out.localization = std::pow(loc / nn, 1.0 / p);
    out.cardinality = std::pow(card / nn, 1.0 / p);
    return out;
}

Eigen::Vector2d position_of(const Eigen::VectorXd& state) {
    return {state[0], state[2]};
}

double label_consistent_coverage(const std::vector<std::vector<TruthState>>& truth,
                                 const std::vector<std::vector<TrackEstimate>>& estimates, double cutoff) {
    std::map<int, std::map<Label, int>> votes;
    std::vector<std::vector<std::pair<int, Label>>> matches(truth.size());
    std::size_t alive = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const auto& tr = truth[k];
        alive += tr.size();
        const auto& est = k < estimates.size() ? estimates[k] : std::vector<TrackEstimate>{};
        if (tr.empty() || est.empty()) continue;
        const auto n = static_cast<Eigen::Index>(tr.size());
        const auto m = static_cast<Eigen::Index>(est.size());
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, m + n, cutoff);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                cost(i, j) = std::min(
                    (position_of(tr[static_cast<std::size_t>(i)].state) - position_of(est[static_cast<std::size_t>(j)].state)).norm(),
                    cutoff);
        const auto sol = solve_assignment(cost);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int j = sol->row_to_col[static_cast<std::size_t>(i)];
            if (j >= m || cost(i, j) >= cutoff) continue;
            const int obj = tr[static_cast<std::size_t>(i)].object;
            const Label lbl = est[static_cast<std::size_t>(j)].label;
            matches[k].emplace_back(obj, lbl);
            ++votes[obj][lbl];
        }
    }
    if (alive == 0) return 1.0;
    std::map<int, Label> majority;
    for (const auto& [obj, counts] : votes) {
        const auto best = std::max_element(counts.begin(), counts.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        majority[obj] = best->first;
    }
    std::size_t good = 0;
    for (const auto& scan : matches)
        for (const auto& [obj, lbl] : scan)
            if (majority[obj] == lbl) ++good;
    return static_cast<double>(good) / static_cast<double>(alive);
}

namespace {

json to_array(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_array(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json births_to_json(const std::vector<BirthSiteParams>& births) {
    json out = json::array();
    for (const auto& b : births)
        out.push_back({{"existence", b.existence}, {"mean", to_array(b.mean)}, {"stddev", to_array(b.stddev)}});
    return out;
}

std::vector<BirthSiteParams> births_from_json(const json& j) {
    std::vector<BirthSiteParams> out;
    for (const auto& b : j)
        out.push_back({b.at("existence").get<double>(), from_array(b.at("mean")), from_array(b.at("stddev"))});
    return out;
}

}  // namespace

std::string scenario_to_json(const ScenarioSpec& spec) {
    json doc;
    doc["schema_version"] = 1;
    doc["name"] = spec.name;
    doc["duration"] = spec.duration;
    doc["tempering"] = {{"birth", spec.tempering.birth},
                        {"survival", spec.tempering.survival},
                        {"detection", spec.tempering.detection}};
    if (const auto* p = std::get_if<LinearParams>(&spec.params)) {
        doc["model"] = "linear";
        doc["params"] = {{"dt", p->dt},         {"sigma_v", p->sigma_v},     {"survival", p->survival},
                         {"sigma_obs", p->sigma_obs}, {"detection", p->detection}, {"clutter", p->clutter},
                         {"half_width", p->half_width}};
        doc["births"] = births_to_json(p->births);
    } else {
        const auto& q = std::get<NonlinearParams>(spec.params);
        doc["model"] = "nonlinear";
        doc["params"] = {{"dt", q.dt},
                         {"sigma_accel", q.sigma_accel},
                         {"sigma_turn", q.sigma_turn},
                         {"survival", q.survival},
                         {"sigma_bearing", q.sigma_bearing},
                         {"sigma_range", q.sigma_range},
                         {"radius", q.radius},
                         {"clutter", q.clutter},
                         {"pd_peak", q.pd_peak},
                         {"pd_edge", q.pd_edge}};
        doc["births"] = births_to_json(q.births);
    }
    json objects = json::array();
    for (const auto& o : spec.objects)
        objects.push_back({{"label", {o.label.birth_time, o.label.index}},
                           {"spawn", o.spawn},
                           {"death", o.death},
                           {"initial", to_array(o.initial)}});
    doc["objects"] = std::move(objects);
    return doc.dump(2) + "\n";
}

ScenarioSpec scenario_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("schema_version").get<int>() != 1) throw std::invalid_argument("unsupported schema_version");
        ScenarioSpec spec;
        spec.name = doc.value("name", std::string("custom"));
        spec.duration = doc.at("duration").get<int>();
        if (doc.contains("tempering")) {
            const auto& t = doc["tempering"];
            spec.tempering = {t.at("birth").get<double>(), t.at("survival").get<double>(),
                              t.at("detection").get<double>()};
        }
        const auto model = doc.at("model").get<std::string>();
        const auto& p = doc.at("params");
        if (model == "linear") {
            LinearParams lp;
            lp.dt = p.at("dt").get<double>();
            lp.sigma_v = p.at("sigma_v").get<double>();
            lp.survival = p.at("survival").get<double>();
            lp.sigma_obs = p.at("sigma_obs").get<double>();
            lp.detection = p.at("detection").get<double>();
            lp.clutter = p.at("clutter").get<double>();
            lp.half_width = p.at("half_width").get<double>();
            lp.births = births_from_json(doc.at("births"));
            spec.params = lp;
        } else if (model == "nonlinear") {
            NonlinearParams np;
            np.dt = p.at("dt").get<double>();
            np.sigma_accel = p.at("sigma_accel").get<double>();
            np.sigma_turn = p.at("sigma_turn").get<double>();
            np.survival = p.at("survival").get<double>();
            np.sigma_bearing = p.at("sigma_bearing").get<double>();
            np.sigma_range = p.at("sigma_range").get<double>();
            np.radius = p.at("radius").get<double>();
            np.clutter = p.at("clutter").get<double>();
            np.pd_peak = p.at("pd_peak").get<double>();
            np.pd_edge = p.at("pd_edge").get<double>();
            np.births = births_from_json(doc.at("births"));
            spec.params = np;
        } else {
            throw std::invalid_argument("model must be \"linear\" or \"nonlinear\"");
        }
        for (const auto& o : doc.at("objects")) {
            const auto lbl = o.at("label").get<std::vector<int>>();
            if (lbl.size() != 2) throw std::invalid_argument("label must be [birth_time, index]");
            spec.objects.push_back({Label{lbl[0], lbl[1]}, o.at("spawn").get<int>(), o.at("death").get<int>(),
                                    from_array(o.at("initial"))});
        }
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed scenario: ") + e.what());
    } catch (const ContractError& e) {
        throw std::invalid_argument(std::string("invalid scenario: ") + e.what());
    }
}

}  // namespace glmb
