#include "glmb/filter.hpp"
#include "glmb/scenarios.hpp"
#include "glmb/two_stage.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace glmb;

namespace {

using ChildKey = std::vector<std::pair<Label, std::vector<int>>>;

std::map<ChildKey, double> by_history(const GlmbDensity& d) {
    std::map<ChildKey, double> out;
    for (const auto& c : d.components) {
        ChildKey key;
        for (const auto& t : c.tracks) key.emplace_back(t->label, t->history);
        out[key] += std::exp(c.log_weight);
    }
    return out;
}

double max_weight_gap(const std::map<ChildKey, double>& a, const std::map<ChildKey, double>& b) {
    double gap = 0.0;
    for (const auto& [k, w] : a) gap = std::max(gap, std::abs(w - (b.count(k) ? b.at(k) : 0.0)));
    for (const auto& [k, w] : b) gap = std::max(gap, std::abs(w - (a.count(k) ? a.at(k) : 0.0)));
    return gap;
}

Eigen::MatrixXd position_selector() {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 4);
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    return H;
}

constexpr double kSigmaObs = 10.0;
constexpr double kSigmaV = 5.0;

Models linear_models(double survival, double detection, double clutter, std::vector<BirthSite> births) {
    const auto cv = constant_velocity(1.0, kSigmaV);
    return {std::make_shared<LinearGaussianMotion>(cv.F, cv.Q, survival, std::move(births)),
            std::make_shared<LinearGaussianMeasurement>(position_selector(),
                                                        kSigmaObs * kSigmaObs * Eigen::MatrixXd::Identity(2, 2),
                                                        detection, clutter, Eigen::Vector2d(-1000, -1000),
                                                        Eigen::Vector2d(1000, 1000))};
}

BirthSite birth_at(double x, double y, double r = 0.04) {
    return {r, GaussianMixture::single(Eigen::Vector4d(x, 0, y, 0), Eigen::Vector4d(10, 10, 10, 10).cwiseAbs2().asDiagonal())};
}

TrackPtr gaussian_track(Label label, Eigen::Vector4d mean, std::vector<int> history = {}, double spread = 4.0) {
    auto t = std::make_shared<Track>();
    t->label = label;
    t->history = std::move(history);
    t->density = GaussianMixture::single(mean, spread * spread * Eigen::Matrix4d::Identity());
    return t;
}

GlmbComponent component_of(std::vector<TrackPtr> tracks, double weight) {
    GlmbComponent c;
    c.log_weight = std::log(weight);
    for (auto& t : tracks) c.labels.push_back(t->label);
    c.tracks = std::move(tracks);
    return c;
}

// ψ̄ for a Gaussian prior on the constant-velocity/position model, written out by hand.
double closed_form_psi(const Eigen::Vector4d& m, const Eigen::Matrix4d& P, const Eigen::Vector2d* z, double pd,
                       double clutter, bool predict) {
    if (z == nullptr) return 1.0 - pd;
    const auto cv = constant_velocity(1.0, kSigmaV);
    Eigen::Vector4d mp = m;
    Eigen::Matrix4d Pp = P;
    if (predict) {
        mp = cv.F * m;
        Pp = cv.F * P * cv.F.transpose() + cv.Q;
    }
    const Eigen::Vector2d mz(mp(0), mp(2));
    Eigen::Matrix2d S;
    S << Pp(0, 0), Pp(0, 2), Pp(2, 0), Pp(2, 2);
    S += kSigmaObs * kSigmaObs * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d e = *z - mz;
    const double q = e.dot(S.inverse() * e);
    const double g = std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(S.determinant()));
    return pd * g / clutter;
}

FilterConfig exhaustive_config() {
    FilterConfig cfg;
    cfg.solver = Solver::exhaustive;
    cfg.weight_floor = 0.0;
    return cfg;
}

}  // namespace

TEST(MultinomialAllocation, SumsToTotalAndSkipsZeroWeights) {
    Rng rng(1);
    const std::vector<double> w{0.5, 0.0, 0.3, 0.2};
    std::vector<double> mean(4, 0.0);
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        const auto counts = multinomial_allocation(w, 1000, rng);
        int total = 0;
        for (std::size_t h = 0; h < 4; ++h) {
            total += counts[h];
            mean[h] += counts[h] / static_cast<double>(reps);
        }
        ASSERT_EQ(total, 1000);
        ASSERT_EQ(counts[1], 0);
    }
    for (std::size_t h = 0; h < 4; ++h) EXPECT_NEAR(mean[h], 1000 * w[h], 2.0);
}

TEST(BuildProblem, DeathAndNonBirthEntries) {
    const std::vector<Label> labels{{0, 1}, {1, 1}};
    const std::vector<Eigen::VectorXd> rows{Eigen::VectorXd::Constant(1, std::log(0.12)),
                                            Eigen::VectorXd::Constant(1, std::log(0.12))};
    const auto p = build_problem(1, labels, {0.99, 0.04}, rows);
    EXPECT_NEAR(p.eta(0, -1), 0.01, 1e-15);
    EXPECT_NEAR(p.eta(1, -1), 0.96, 1e-15);
    EXPECT_NEAR(p.eta(0, 0), 0.99 * 0.12, 1e-15);
}

TEST(BuildProblem, RejectsExistenceOutsideOpenInterval) {
    const std::vector<Eigen::VectorXd> rows{Eigen::VectorXd::Zero(1)};
    EXPECT_THROW((void)build_problem(1, {{0, 1}}, {1.0}, rows), ContractError);
}

TEST(BuildProblem, MatchesClosedFormGaussianIntegrals) {
    const auto models = linear_models(0.99, 0.88, 1.65e-5, {birth_at(0, 100)});
    const Eigen::Vector4d m1(10, 1, 20, -1), m2(-50, 0, 60, 2);
    const auto comp = component_of({gaussian_track({0, 1}, m1), gaussian_track({0, 2}, m2)}, 1.0);
    const MeasurementSet Z{Eigen::Vector2d(12, 17), Eigen::Vector2d(-45, 66), Eigen::Vector2d(3, 98)};
    Rng rng(0);
    const auto pred = predict_density(comp, 1, *models.motion, rng);
    const auto p = build_problem(pred, Z, models);
    ASSERT_EQ(p.P(), 3);
    ASSERT_EQ(p.R, 2);
    ASSERT_EQ(p.M, 3);

    struct Row {
        Eigen::Vector4d mean;
        Eigen::Matrix4d cov;
        double existence;
        bool predict;
    };
    const std::vector<Row> rows{{m1, 16 * Eigen::Matrix4d::Identity(), 0.99, true},
                                {m2, 16 * Eigen::Matrix4d::Identity(), 0.99, true},
                                {Eigen::Vector4d(0, 0, 100, 0), 100 * Eigen::Matrix4d::Identity(), 0.04, false}};
    for (int i = 0; i < 3; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        EXPECT_NEAR(p.eta(i, -1), 1 - r.existence, 1e-12);
        for (int j = 0; j <= 3; ++j) {
            Eigen::Vector2d z;
            if (j > 0) z = Z[static_cast<std::size_t>(j - 1)];
            const double expected =
                r.existence * closed_form_psi(r.mean, r.cov, j > 0 ? &z : nullptr, 0.88, 1.65e-5, r.predict);
            EXPECT_NEAR(p.eta(i, j) / expected, 1.0, 1e-8) << "row " << i << " j " << j;
        }
    }
}

TEST(BuildProblem, TemperingOnlyTouchesTheSamplingTable) {
    const std::vector<Label> labels{{0, 1}, {1, 1}};
    Eigen::VectorXd row(2);
    row << std::log(0.12), std::log(3.0);
    const std::vector<Eigen::VectorXd> rows{row, row};
    const Tempering t{10.0, 0.95, 0.95};
    const auto p = build_problem(1, labels, {0.99, 0.04}, rows, t);
    EXPECT_NEAR(p.eta(0, -1), 1 - 0.99 * 0.95, 1e-14);
    EXPECT_NEAR(p.eta(1, -1), 1 - 0.4, 1e-14);
    // Miss: 1 - f_d·P_D with P_D = 0.88.
    EXPECT_NEAR(p.eta(0, 0), 0.99 * 0.95 * (1 - 0.95 * 0.88), 1e-14);
    EXPECT_NEAR(p.eta(1, 1), 0.4 * 3.0 * 0.95, 1e-14);
    // Birth existence is capped below one.
    const auto capped = build_problem(1, labels, {0.99, 0.5}, rows, t);
    EXPECT_GT(capped.eta(1, -1), 0.0);
}

TEST(FilterConfig, ValidateRejectsBadSettings) {
    FilterConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.h_max = 0;
    EXPECT_THROW(cfg.validate(), ContractError);
    cfg = {};
    cfg.tempering.birth = 0.5;
    EXPECT_THROW(cfg.validate(), ContractError);
    cfg = {};
    cfg.tempering.detection = 1.5;
    EXPECT_THROW(cfg.validate(), ContractError);
    cfg = {};
    cfg.backend.backend = Backend::smc;
    cfg.backend.smc.particles_per_track = 50;
    EXPECT_THROW(cfg.validate(), ContractError);
}

TEST(JointStep, EmptyDensityWithoutBirthsStaysEmpty) {
    const auto models = linear_models(0.99, 0.88, 1.65e-5, {});
    const MeasurementSet Z{Eigen::Vector2d(1, 2)};
    const auto out = joint_step(GlmbDensity::empty_set(3), Z, models, exhaustive_config());
    ASSERT_EQ(out.components.size(), 1u);
    EXPECT_TRUE(out.components[0].labels.empty());
    EXPECT_EQ(out.scan_time, 4);
    const auto ref = two_stage_oracle(GlmbDensity::empty_set(3), Z, models);
    ASSERT_EQ(ref.components.size(), 1u);
    EXPECT_TRUE(ref.components[0].labels.empty());
}

TEST(JointStep, LowSurvivalFavoursAllDeaths) {
    const auto models = linear_models(0.01, 0.88, 1.65e-5, {});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(0, 1, 0, 1)),
                                         gaussian_track({0, 2}, Eigen::Vector4d(100, 1, 0, 1)),
                                         gaussian_track({0, 3}, Eigen::Vector4d(0, 1, 100, 1))},
                                        1.0));
    const auto out = joint_step(d, {}, models, exhaustive_config());
    const auto best = std::max_element(out.components.begin(), out.components.end(),
                                       [](const auto& a, const auto& b) { return a.log_weight < b.log_weight; });
    EXPECT_TRUE(best->labels.empty());
}

TEST(JointStep, MeasurementAtPredictionIsMapAssociation) {
    const auto models = linear_models(0.99, 0.88, 1e-12, {});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(200, 0, -300, 0), {}, 1.0)}, 1.0));
    const MeasurementSet Z{Eigen::Vector2d(500, 500), Eigen::Vector2d(200, -300)};
    for (Solver s : {Solver::exhaustive, Solver::murty, Solver::gibbs}) {
        FilterConfig cfg;
        cfg.solver = s;
        cfg.h_max = 20;
        const auto out = joint_step(d, Z, models, cfg);
        const auto est = estimate_state(out);
        const auto best = std::max_element(out.components.begin(), out.components.end(),
                                           [](const auto& a, const auto& b) { return a.log_weight < b.log_weight; });
        ASSERT_EQ(best->tracks.size(), 1u);
        EXPECT_EQ(best->tracks[0]->history, std::vector<int>{2});
        ASSERT_EQ(est.size(), 1u);
        EXPECT_NEAR(est[0].state(0), 200.0, 1.0);
    }
}

TEST(JointStep, OneTrackOneBirthOneMeasurementHasEightChildren) {
    const double ps = 0.99, pd = 0.88, kappa = 1.65e-5, rb = 0.04;
    const auto models = linear_models(ps, pd, kappa, {birth_at(0, 100, rb)});
    const Eigen::Vector4d m(20, 1, 80, 1);
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, m)}, 1.0));
    const Eigen::Vector2d z(25, 85);
    const MeasurementSet Z{z};

    const Eigen::Matrix4d P = 16 * Eigen::Matrix4d::Identity();
    const Eigen::Matrix4d Pb = 100 * Eigen::Matrix4d::Identity();
    const Eigen::Vector4d mb(0, 0, 100, 0);
    const double t0 = closed_form_psi(m, P, nullptr, pd, kappa, true);
    const double t1 = closed_form_psi(m, P, &z, pd, kappa, true);
    const double b0 = closed_form_psi(mb, Pb, nullptr, pd, kappa, false);
    const double b1 = closed_form_psi(mb, Pb, &z, pd, kappa, false);
    const Label l{0, 1}, b{1, 1};
    std::map<ChildKey, double> hand{
        {{}, (1 - ps) * (1 - rb)},
        {{{l, {0}}}, ps * t0 * (1 - rb)},
        {{{l, {1}}}, ps * t1 * (1 - rb)},
        {{{b, {0}}}, (1 - ps) * rb * b0},
        {{{b, {1}}}, (1 - ps) * rb * b1},
        {{{l, {0}}, {b, {0}}}, ps * t0 * rb * b0},
        {{{l, {1}}, {b, {0}}}, ps * t1 * rb * b0},
        {{{l, {0}}, {b, {1}}}, ps * t0 * rb * b1},
    };
    double total = 0.0;
    for (const auto& [k, w] : hand) total += w;
    for (auto& [k, w] : hand) w /= total;

    const auto joint = by_history(joint_step(d, Z, models, exhaustive_config()));
    const auto two_stage = by_history(two_stage_oracle(d, Z, models));
    EXPECT_EQ(joint.size(), 8u);
    EXPECT_EQ(two_stage.size(), 8u);
    EXPECT_LT(max_weight_gap(joint, hand), 1e-10);
    EXPECT_LT(max_weight_gap(two_stage, hand), 1e-10);
}

TEST(JointStep, AgreesWithTwoStageOnMixedParents) {
    const auto models = linear_models(0.95, 0.8, 1e-4, {birth_at(0, 100)});
    const auto a = gaussian_track({0, 1}, Eigen::Vector4d(0, 2, 0, 1), {1});
    const auto b = gaussian_track({0, 2}, Eigen::Vector4d(60, -1, 30, 0), {0});
    const auto a2 = gaussian_track({0, 1}, Eigen::Vector4d(5, 2, -4, 1), {2});
    GlmbDensity d;
    d.components.push_back(component_of({a, b}, 0.5));
    d.components.push_back(component_of({a2, b}, 0.2));
    d.components.push_back(component_of({a}, 0.2));
    d.components.push_back(component_of({}, 0.1));
    d.normalize();
    const MeasurementSet Z{Eigen::Vector2d(3, 2), Eigen::Vector2d(58, 31)};
    const auto joint = by_history(joint_step(d, Z, models, exhaustive_config()));
    const auto ref = by_history(two_stage_oracle(d, Z, models));
    EXPECT_EQ(joint.size(), ref.size());
    EXPECT_LT(max_weight_gap(joint, ref), 1e-10);
}

TEST(JointStep, TemperingNeverChangesChildWeights) {
    const auto models = linear_models(0.99, 0.88, 1e-4, {birth_at(0, 100)});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(0, 0, 0, 0)),
                                         gaussian_track({0, 2}, Eigen::Vector4d(50, 0, 50, 0))},
                                        1.0));
    const MeasurementSet Z{Eigen::Vector2d(1, 1), Eigen::Vector2d(49, 52)};
    auto tempered = exhaustive_config();
    tempered.tempering = {10.0, 0.95, 0.95};
    const auto a = joint_step(d, Z, models, exhaustive_config());
    const auto b = joint_step(d, Z, models, tempered);
    ASSERT_EQ(a.components.size(), b.components.size());
    for (std::size_t i = 0; i < a.components.size(); ++i) EXPECT_EQ(a.components[i].log_weight, b.components[i].log_weight);

    // Ranked solutions with every child reachable give the same density.
    FilterConfig murty;
    murty.solver = Solver::murty;
    murty.h_max = 1000;
    murty.weight_floor = 0.0;
    auto murty_tempered = murty;
    murty_tempered.tempering = {10.0, 0.95, 0.95};
    EXPECT_LT(max_weight_gap(by_history(joint_step(d, Z, models, murty)),
                             by_history(joint_step(d, Z, models, murty_tempered))),
              1e-14);
}

TEST(JointStep, RankedEqualsExhaustiveWhenCapCoversEverything) {
    const auto models = linear_models(0.9, 0.7, 1e-4, {birth_at(0, 100)});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(0, 0, 0, 0))}, 1.0));
    const MeasurementSet Z{Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 95), Eigen::Vector2d(-300, 10)};
    FilterConfig murty;
    murty.solver = Solver::murty;
    murty.h_max = 10000;
    murty.weight_floor = 0.0;
    const auto ranked = by_history(joint_step(d, Z, models, murty));
    const auto full = by_history(joint_step(d, Z, models, exhaustive_config()));
    EXPECT_EQ(ranked.size(), full.size());
    EXPECT_LT(max_weight_gap(ranked, full), 1e-14);
}

TEST(JointStep, CapturedMassGrowsWithCap) {
    const auto models = linear_models(0.95, 0.85, 1e-4, {birth_at(0, 100), birth_at(-100, -100)});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(0, 0, 0, 0)),
                                         gaussian_track({0, 2}, Eigen::Vector4d(40, 0, 40, 0))},
                                        1.0));
    const MeasurementSet Z{Eigen::Vector2d(1, 1), Eigen::Vector2d(38, 41), Eigen::Vector2d(2, 99),
                           Eigen::Vector2d(500, 500)};
    for (Solver s : {Solver::murty, Solver::gibbs}) {
        double previous = -std::numeric_limits<double>::infinity();
        for (int h : {1, 2, 5, 10, 50, 200}) {
            FilterConfig cfg;
            cfg.solver = s;
            cfg.h_max = h;
            cfg.weight_floor = 0.0;
            cfg.rng_seed = 4;
            StepDiagnostics diag;
            const auto out = joint_step(d, Z, models, cfg, &diag);
            EXPECT_GE(diag.log_captured_mass, previous - 1e-12) << "h_max " << h;
            EXPECT_LE(static_cast<int>(out.components.size()), h);
            previous = diag.log_captured_mass;
        }
    }
}

TEST(JointStep, FloorAboveEveryChildIsDegenerate) {
    const auto models = linear_models(0.5, 0.5, 1e-4, {});
    GlmbDensity d;
    d.components.push_back(component_of({gaussian_track({0, 1}, Eigen::Vector4d(0, 0, 0, 0)),
                                         gaussian_track({0, 2}, Eigen::Vector4d(40, 0, 40, 0))},
                                        1.0));
    auto cfg = exhaustive_config();
    cfg.weight_floor = 0.9;
    StepDiagnostics diag;
    const auto out = joint_step(d, {}, models, cfg, &diag);
    EXPECT_TRUE(diag.degenerate);
    ASSERT_EQ(out.components.size(), 1u);
    EXPECT_TRUE(out.components[0].labels.empty());
    EXPECT_EQ(out.scan_time, 1);
}

TEST(JointStep, OutputIsNormalizedWithDistinctSortedLabels) {
    const auto spec = linear_scenario();
    const auto models = spec.build_models();
    const auto sim = simulate(spec, 5);
    FilterConfig cfg;
    cfg.h_max = 200;
    cfg.tempering = spec.tempering;
    cfg.rng_seed = 1;
    GlmbDensity d = GlmbDensity::empty_set();
    for (int k = 0; k < 15; ++k) {
        StepDiagnostics diag;
        d = joint_step(d, sim.measurements[static_cast<std::size_t>(k)], models, cfg, &diag);
        ASSERT_NEAR(d.total_weight(), 1.0, 1e-9);
        EXPECT_EQ(diag.children, static_cast<int>(d.components.size()));
        EXPECT_EQ(diag.scan, k + 1);
        for (const auto& c : d.components) ASSERT_NO_THROW(c.validate());
    }
}

TEST(JointStep, SameSeedSameDensity) {
    const auto spec = linear_scenario();
    const auto models = spec.build_models();
    const auto sim = simulate(spec, 8);
    FilterConfig cfg;
    cfg.h_max = 100;
    cfg.rng_seed = 42;
    auto run = [&] {
        GlmbDensity d = GlmbDensity::empty_set();
        for (int k = 0; k < 8; ++k) d = joint_step(d, sim.measurements[static_cast<std::size_t>(k)], models, cfg);
        return by_history(d);
    };
    EXPECT_EQ(run(), run());
}

TEST(JointStep, ParticleBackendOnTurnScenario) {
    auto spec = nonlinear_scenario();
    spec.scale_clutter(0.25);
    const auto models = spec.build_models();
    const auto sim = simulate(spec, 2);
    FilterConfig cfg;
    cfg.h_max = 100;
    cfg.backend.backend = Backend::smc;
    cfg.backend.smc.particles_per_track = 300;
    cfg.tempering = spec.tempering;
    GlmbDensity d = GlmbDensity::empty_set();
    for (int k = 0; k < 5; ++k) {
        d = joint_step(d, sim.measurements[static_cast<std::size_t>(k)], models, cfg);
        ASSERT_NEAR(d.total_weight(), 1.0, 1e-9);
        for (const auto& c : d.components)
            for (const auto& t : c.tracks) {
                ASSERT_TRUE(std::holds_alternative<ParticleSet>(t->density));
                ASSERT_NO_THROW(validate_density(t->density));
            }
    }
}

TEST(PredictDensity, SurvivorsThenBirths) {
    const auto models = linear_models(0.97, 0.88, 1e-4, {birth_at(0, 100), birth_at(5, 5, 0.03)});
    const Eigen::Vector4d m(1, 2, 3, 4);
    const auto comp = component_of({gaussian_track({0, 1}, m)}, 1.0);
    Rng rng(0);
    const auto pred = predict_density(comp, 6, *models.motion, rng);
    ASSERT_EQ(pred.labels.size(), 3u);
    EXPECT_EQ(pred.surviving, 1);
    EXPECT_EQ(pred.labels[1], (Label{6, 1}));
    EXPECT_EQ(pred.labels[2], (Label{6, 2}));
    EXPECT_EQ(pred.existence, (std::vector<double>{0.97, 0.04, 0.03}));
    const auto cv = constant_velocity(1.0, kSigmaV);
    const auto& gm = std::get<GaussianMixture>(pred.densities[0]);
    EXPECT_TRUE(gm.means[0].isApprox(cv.F * m));
    EXPECT_TRUE(gm.covariances[0].isApprox(cv.F * (16 * Eigen::Matrix4d::Identity()) * cv.F.transpose() + cv.Q));
}
