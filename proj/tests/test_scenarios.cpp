#include "glmb/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace glmb;

namespace {

std::vector<Eigen::VectorXd> random_set(Rng& rng, int max_size) {
    std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(rng() % static_cast<unsigned>(max_size + 1)));
    for (auto& p : out) p = Eigen::Vector2d(200 * uniform01(rng), 200 * uniform01(rng));
    return out;
}

double alive_fraction_in_region(const ScenarioSpec& spec) {
    const auto models = spec.build_models();
    const auto truth = truth_tracks(spec);
    int alive = 0, inside = 0;
    for (const auto& scan : truth)
        for (const auto& t : scan) {
            ++alive;
            inside += models.measurement->in_region(t.state) ? 1 : 0;
        }
    return static_cast<double>(inside) / alive;
}

}  // namespace

TEST(LinearScenario, ClutterAndBirthTotals) {
    const auto spec = linear_scenario();
    const auto models = spec.build_models();
    EXPECT_NEAR(models.measurement->expected_clutter(), 66.0, 1e-9);
    double births = 0.0;
    for (const auto& b : models.motion->birth_sites()) births += b.existence;
    EXPECT_NEAR(births, 0.12, 1e-15);
    EXPECT_EQ(spec.state_dim(), 4);
    EXPECT_EQ(spec.objects.size(), 10u);
}

TEST(LinearScenario, TenObjectsInTotal) {
    const auto truth = truth_tracks(linear_scenario());
    ASSERT_EQ(truth.size(), 100u);
    std::size_t peak = 0;
    for (const auto& s : truth) peak = std::max(peak, s.size());
    EXPECT_LE(peak, 10u);
    EXPECT_GE(peak, 5u);
    EXPECT_GE(alive_fraction_in_region(linear_scenario()), 0.95);
}

TEST(NonlinearScenario, ParametersAndRegion) {
    const auto spec = nonlinear_scenario();
    const auto models = spec.build_models();
    EXPECT_NEAR(models.measurement->expected_clutter(), 1.6e-2 * 2000 * std::numbers::pi, 1e-9);
    const auto& sites = models.motion->birth_sites();
    ASSERT_EQ(sites.size(), 4u);
    EXPECT_EQ(sites[0].existence, 0.02);
    EXPECT_EQ(sites[3].existence, 0.03);
    EXPECT_NEAR(std::sqrt(sites[0].density.covariances[0](4, 4)), 6 * std::numbers::pi / 180, 1e-15);
    EXPECT_EQ(spec.state_dim(), 5);
    EXPECT_GE(alive_fraction_in_region(spec), 0.95);
}

TEST(NonlinearScenario, TurningTruthKeepsSpeed) {
    const auto truth = truth_tracks(nonlinear_scenario());
    const auto& first = truth[0][0].state;
    const auto& later = truth[50][0].state;
    EXPECT_NEAR(std::hypot(first[1], first[3]), std::hypot(later[1], later[3]), 1e-9);
}

TEST(Simulate, ClutterCountMatchesPoissonMean) {
    auto spec = linear_scenario();
    spec.duration = 10000;
    const auto sim = simulate(spec, 3);
    long long clutter = 0;
    for (const auto& o : sim.origins)
        for (int v : o) clutter += v < 0 ? 1 : 0;
    const double mean = static_cast<double>(clutter) / 10000.0;
    EXPECT_LT(std::abs(mean - 66.0), 3.0 * std::sqrt(66.0 / 10000.0));
}

TEST(Simulate, CertainDetectionWithoutClutterObservesEveryObject) {
    auto spec = linear_scenario();
    auto& p = std::get<LinearParams>(spec.params);
    p.detection = 1.0 - 1e-12;
    p.clutter = 1e-15;
    const auto sim = simulate(spec, 4);
    for (std::size_t k = 0; k < sim.truth.size(); ++k) EXPECT_EQ(sim.measurements[k].size(), sim.truth[k].size());
}

TEST(Simulate, DetectionRateWithinThreeSigma) {
    const auto spec = linear_scenario();
    long long alive = 0, detected = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto sim = simulate(spec, seed);
        for (std::size_t k = 0; k < sim.truth.size(); ++k) {
            alive += static_cast<long long>(sim.truth[k].size());
            for (int o : sim.origins[k]) detected += o >= 0 ? 1 : 0;
        }
    }
    const double rate = static_cast<double>(detected) / static_cast<double>(alive);
    EXPECT_LT(std::abs(rate - 0.88), 3.0 * std::sqrt(0.88 * 0.12 / static_cast<double>(alive)));
}

TEST(Simulate, SeedReproducible) {
    for (const auto& spec : {linear_scenario(), nonlinear_scenario()}) {
        const auto a = simulate(spec, 12);
        const auto b = simulate(spec, 12);
        const auto c = simulate(spec, 13);
        ASSERT_EQ(a.measurements.size(), b.measurements.size());
        bool differs = false;
        for (std::size_t k = 0; k < a.measurements.size(); ++k) {
            ASSERT_EQ(a.measurements[k].size(), b.measurements[k].size());
            for (std::size_t i = 0; i < a.measurements[k].size(); ++i) ASSERT_EQ(a.measurements[k][i], b.measurements[k][i]);
            EXPECT_EQ(a.origins[k], b.origins[k]);
            differs = differs || a.measurements[k].size() != c.measurements[k].size();
        }
        EXPECT_TRUE(differs);
    }
}

TEST(Simulate, BearingRangeMeasurementsInsideClutterBox) {
    const auto sim = simulate(nonlinear_scenario(), 5);
    for (const auto& scan : sim.measurements)
        for (const auto& z : scan) {
            ASSERT_LE(std::abs(z[0]), std::numbers::pi);
            ASSERT_GE(z[1], -50.0);
        }
}

TEST(ScenarioSpec, ValidateRejectsInvertedLifetimes) {
    auto spec = linear_scenario();
    spec.objects[0].death = spec.objects[0].spawn;
    EXPECT_THROW(spec.validate(), ContractError);
    EXPECT_THROW(linear_scenario().scale_clutter(0.0), ContractError);
}

TEST(ScenarioSpec, ClutterScaling) {
    auto spec = nonlinear_scenario();
    spec.scale_clutter(0.25);
    EXPECT_NEAR(spec.build_models().measurement->expected_clutter(), 0.25 * 1.6e-2 * 2000 * std::numbers::pi, 1e-9);
}

TEST(ScenarioJson, RoundTrip) {
    for (const auto& spec : {linear_scenario(), nonlinear_scenario()}) {
        const auto text = scenario_to_json(spec);
        const auto back = scenario_from_json(text);
        EXPECT_EQ(scenario_to_json(back), text);
        EXPECT_EQ(back.objects.size(), spec.objects.size());
        EXPECT_EQ(back.tempering.birth, spec.tempering.birth);
        const auto a = truth_tracks(spec);
        const auto b = truth_tracks(back);
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_EQ(a[k][i].state, b[k][i].state);
    }
}

TEST(ScenarioJson, MalformedDocumentsRejected) {
    EXPECT_THROW((void)scenario_from_json("{"), std::invalid_argument);
    EXPECT_THROW((void)scenario_from_json("{\"schema_version\": 1}"), std::invalid_argument);
    auto text = scenario_to_json(linear_scenario());
    text.replace(text.find("\"linear\"", text.find("\"model\"")), 8, "\"radar\"");
    EXPECT_THROW((void)scenario_from_json(text), std::invalid_argument);
}

TEST(Ospa, IdenticalSetsAreZero) {
    const std::vector<Eigen::VectorXd> x{Eigen::Vector2d(1, 2), Eigen::Vector2d(5, 5)};
    EXPECT_EQ(ospa(x, x).total, 0.0);
    EXPECT_EQ(ospa({}, {}).total, 0.0);
}

TEST(Ospa, MissingPointCostsCutoff) {
    const std::vector<Eigen::VectorXd> x{Eigen::Vector2d(1, 2)};
    const auto r = ospa(x, {});
    EXPECT_DOUBLE_EQ(r.total, 100.0);
    EXPECT_DOUBLE_EQ(r.cardinality, 100.0);
    EXPECT_DOUBLE_EQ(r.localization, 0.0);
}

TEST(Ospa, SinglePairOneDimension) {
    const std::vector<Eigen::VectorXd> x{Eigen::VectorXd::Constant(1, 0.0)};
    const std::vector<Eigen::VectorXd> y{Eigen::VectorXd::Constant(1, 3.0)};
    EXPECT_DOUBLE_EQ(ospa(x, y, {10.0, 1.0}).total, 3.0);
}

TEST(Ospa, SymmetricAndTriangular) {
    Rng rng(6);
    for (int rep = 0; rep < 500; ++rep) {
        const auto a = random_set(rng, 4);
        const auto b = random_set(rng, 4);
        const auto c = random_set(rng, 4);
        for (double p : {1.0, 2.0}) {
            const OspaParams params{100.0, p};
            const double ab = ospa(a, b, params).total;
            EXPECT_NEAR(ab, ospa(b, a, params).total, 1e-12);
            EXPECT_LE(ab, ospa(a, c, params).total + ospa(c, b, params).total + 1e-9);
            EXPECT_LE(ab, 100.0 + 1e-12);
        }
    }
}

TEST(Coverage, PerfectEstimatesCoverEverything) {
    const auto truth = truth_tracks(linear_scenario());
    std::vector<std::vector<TrackEstimate>> est(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k)
        for (const auto& t : truth[k]) est[k].push_back({t.label, t.state});
    EXPECT_DOUBLE_EQ(label_consistent_coverage(truth, est, 100.0), 1.0);
    EXPECT_DOUBLE_EQ(label_consistent_coverage(truth, {}, 100.0), 0.0);
}

TEST(Coverage, LabelSwitchAndMissesCount) {
    // One object for 10 scans: label A for 7 scans, B for 2, nothing for 1.
    std::vector<std::vector<TruthState>> truth(10);
    std::vector<std::vector<TrackEstimate>> est(10);
    for (int k = 0; k < 10; ++k) {
        const Eigen::Vector4d x(10.0 * k, 10, 0, 0);
        truth[static_cast<std::size_t>(k)].push_back({0, Label{1, 1}, x});
        if (k == 9) continue;
        est[static_cast<std::size_t>(k)].push_back({k < 7 ? Label{1, 1} : Label{8, 1}, x + Eigen::Vector4d(3, 0, 0, 0)});
    }
    EXPECT_DOUBLE_EQ(label_consistent_coverage(truth, est, 100.0), 0.7);
    // Estimates beyond the cutoff do not count.
    for (auto& e : est)
        for (auto& t : e) t.state[0] += 1000.0;
    EXPECT_DOUBLE_EQ(label_consistent_coverage(truth, est, 100.0), 0.0);
}
