#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "riskpool/asymptotics.hpp"
#include "riskpool/mc_engine.hpp"

using namespace riskpool;

namespace {

ExperimentConfig two_point_config() {
    ExperimentConfig c;
    c.distribution = ParametricDistribution(TwoPointLaw{0.0, 1.0, 0.5});
    c.measure = MixtureMeasure::dirac(0.5);
    c.n_grid = {1, 2, 3};
    c.replications = 20000;
    c.batches = 20;
    c.seed = 11;
    return c;
}

} // namespace

TEST(ExperimentConfig, Validation) {
    ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    c.n_grid = {};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.n_grid = {4, 4};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.n_grid = {0, 4};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.replications = 1001;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.batches = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.distribution = ParametricDistribution(UniformLaw{0, 1});
    c.path = PathMode::Exact;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ExperimentConfig, PathSelection) {
    ExperimentConfig c;
    EXPECT_TRUE(c.uses_exact_path());
    c.utility = CaraUtility{1.0};
    EXPECT_FALSE(c.uses_exact_path());
    EXPECT_TRUE(c.exact_path_available());
    c.path = PathMode::Exact;
    EXPECT_TRUE(c.uses_exact_path());
    c.path = PathMode::MonteCarlo;
    c.utility = LinearUtility{};
    EXPECT_FALSE(c.uses_exact_path());
}

TEST(EstimateScaledPremium, ExactNormalLinear) {
    ExperimentConfig c;
    c.distribution = ParametricDistribution(NormalLaw{0.0, 2.0});
    c.measure = MixtureMeasure::dirac(0.5);
    for (std::size_t n : {1u, 4u, 4096u}) {
        const auto rec = estimate_scaled_premium(c, n);
        EXPECT_TRUE(rec.exact);
        EXPECT_EQ(rec.stderr_, 0.0);
        EXPECT_NEAR(rec.estimate, 2.0 * 0.797884560802865356, 1e-12);
        EXPECT_NEAR(rec.unscaled(), rec.estimate / std::sqrt(static_cast<double>(n)), 1e-15);
    }
}

TEST(EstimateScaledPremium, ExactNormalCara) {
    ExperimentConfig c;
    c.distribution = ParametricDistribution(NormalLaw{1.0, 1.5});
    c.utility = CaraUtility{0.8};
    c.wealth = 3.0;
    c.path = PathMode::Exact;
    for (std::size_t n : {1u, 16u, 1024u}) {
        const double nn = static_cast<double>(n);
        const auto rec = estimate_scaled_premium(c, n);
        EXPECT_NEAR(rec.unscaled(), 0.8 * 2.25 / (2.0 * nn), 1e-12);
    }
}

TEST(EstimateScaledPremium, DegenerateRiskHasNoPremium) {
    ExperimentConfig c;
    c.distribution = DiscreteDistribution::degenerate(2.0);
    c.measure = MixtureMeasure({{0.2, 0.5}, {1.0, 0.5}});
    c.utility = CaraUtility{1.0};
    c.replications = 200;
    for (std::size_t n : {1u, 7u}) {
        const auto rec = estimate_scaled_premium(c, n);
        EXPECT_FALSE(rec.exact);
        EXPECT_NEAR(rec.estimate, 0.0, 1e-13);
        EXPECT_NEAR(rec.stderr_, 0.0, 1e-13);
    }
}

TEST(EstimateScaledPremium, TwoPointPoolMatchesEnumeration) {
    const auto c = two_point_config();
    for (unsigned n : {2u, 3u}) {
        const auto [x, p] = oracle::enumerate_two_point_pool(0.0, 1.0, 0.5, n);
        const double exact = std::sqrt(static_cast<double>(n)) * (0.5 - oracle::tail_average_ru(x, p, 0.5));
        const auto rec = estimate_scaled_premium(c, n);
        EXPECT_GT(rec.stderr_, 0.0);
        EXPECT_LE(std::abs(rec.estimate - exact), 4.0 * rec.stderr_) << "n " << n << " exact " << exact;
    }
    // n = 2 by hand: sqrt(2) * (1/2 - 1/4)
    EXPECT_NEAR(std::sqrt(2.0) * 0.25, 0.3535533905932738, 1e-15);
}

TEST(EstimateScaledPremium, IdenticalAcrossThreadCounts) {
    auto c = two_point_config();
    c.utility = CaraUtility{0.7};
    const auto one = estimate_scaled_premium(c, 5, RunOptions{1});
    const auto many = estimate_scaled_premium(c, 5, RunOptions{4});
    EXPECT_EQ(one.batch_estimates, many.batch_estimates);
    EXPECT_EQ(one.estimate, many.estimate);
    EXPECT_EQ(one.stderr_, many.stderr_);
}

TEST(EstimateScaledPremium, SeedChangesEstimate) {
    auto c = two_point_config();
    const auto a = estimate_scaled_premium(c, 3);
    c.seed = 12;
    const auto b = estimate_scaled_premium(c, 3);
    EXPECT_NE(a.batch_estimates, b.batch_estimates);
}

TEST(EstimateScaledPremium, DomainViolationNamesThePoolSize) {
    auto c = two_point_config();
    c.distribution = ParametricDistribution(TwoPointLaw{-1.0, 1.0, 0.5});
    c.utility = LogUtility{0.0};
    try {
        (void)estimate_scaled_premium(c, 2);
        FAIL() << "expected a domain error";
    } catch (const CellDomainError& e) {
        EXPECT_EQ(e.n(), 2u);
    }
}

TEST(RunCurve, LimitAndRateFit) {
    ExperimentConfig c;
    c.measure = MixtureMeasure::dirac(0.5);
    c.n_grid = {4, 16, 64, 256};
    const auto curve = run_curve(c);
    EXPECT_EQ(curve.records.size(), 4u);
    EXPECT_NEAR(curve.limit, 0.797884560802865356, 1e-13);
    EXPECT_FALSE(curve.family_limit);
    ASSERT_TRUE(curve.rate_fit.has_value());
    EXPECT_EQ(curve.rate_fit->points.size(), 3u);
    EXPECT_NEAR(curve.rate_fit->slope, -0.5, 1e-9);

    c.fit_drop_smallest = 2;
    const auto short_curve = run_curve(c);
    EXPECT_FALSE(short_curve.rate_fit.has_value());
    EXPECT_FALSE(short_curve.rate_fit_note.empty());
}

TEST(RunCurve, ZeroPremiumSkipsFit) {
    ExperimentConfig c; // expectation, linear utility: premium is identically zero
    c.n_grid = {1, 2, 4, 8};
    const auto curve = run_curve(c);
    EXPECT_FALSE(curve.rate_fit.has_value());
    EXPECT_EQ(curve.limit, 0.0);
    for (const auto& r : curve.records) {
        EXPECT_NEAR(r.estimate, 0.0, 1e-15);
    }
}

TEST(RunCurve, FamilyLimit) {
    auto c = two_point_config();
    c.measure = KusuokaFamily({MixtureMeasure::dirac(0.3), MixtureMeasure::dirac(0.7)});
    c.n_grid = {1, 2};
    const auto curve = run_curve(c);
    EXPECT_TRUE(curve.family_limit);
    EXPECT_NEAR(curve.sigma, 0.5, 1e-15);
    EXPECT_NEAR(curve.limit, 0.579487690333456284, 1e-13);
}

TEST(CompareToLimit, TrendAndTolerance) {
    PremiumCurve curve;
    curve.limit = 1.0;
    curve.records = {{4, 1.5, 0.01, 100, false, {}}, {16, 1.2, 0.01, 100, false, {}}, {64, 1.1, 0.01, 100, false, {}},
                     {256, 1.03, 0.01, 100, false, {}}};
    auto report = compare_to_limit(curve);
    EXPECT_TRUE(report.trend_ok);
    EXPECT_TRUE(report.final_within_tolerance); // 0.03 <= 4 * 0.01
    EXPECT_NEAR(report.rows[3].z_score, 3.0, 1e-12);

    curve.records[3].estimate = 1.05;
    report = compare_to_limit(curve);
    EXPECT_FALSE(report.final_within_tolerance); // 0.05 > max(0.04, 0.021)

    curve.records[3].estimate = 1.2; // gap grows by 0.1 > 2 * (0.01 + 0.01)
    report = compare_to_limit(curve);
    EXPECT_FALSE(report.trend_ok);

    curve.records[3].estimate = 1.13; // grows by 0.03 < 0.04
    report = compare_to_limit(curve);
    EXPECT_TRUE(report.trend_ok);
}

TEST(CompareToLimit, ZScoreWithoutNoise) {
    EXPECT_EQ(z_score(0.0, 0.0), 0.0);
    EXPECT_EQ(z_score(1e-3, 0.0), std::numeric_limits<double>::infinity());
    EXPECT_EQ(z_score(-1e-3, 0.0), -std::numeric_limits<double>::infinity());
    EXPECT_EQ(z_score(0.5, 0.25), 2.0);
}
