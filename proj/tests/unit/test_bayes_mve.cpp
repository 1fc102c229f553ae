#include <gtest/gtest.h>

#include <cmath>

#include "cbop/bayes_mve.hpp"
#include "cbop/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cbop;

namespace {

struct Fixture {
    DynamicsEnsemble dynamics = testkit::linear_dynamics(0.9, 0.1, 1.0, 0.5);
    PolicyNet policy = testkit::linear_tanh_policy(0.8, 0.1);
    QEnsemble critic = QEnsemble::from_heads({testkit::affine_q_head(2.0, 1.0, -1.0)}, 1, 0.005);
    Transition t{{0.4}, {0.2}, -0.16, {0.38}, false};

    double pi(double s) const { return std::tanh(0.8 * s + 0.1); }
    double q(double s, double a) const { return 2.0 * s + a - 1.0; }
    double model_next(double s, double a) const { return 0.9 * s + 0.1 * a; }
    double model_reward(double s, double a) const { return s + 0.5 * a; }

    RolloutConfig config(std::size_t horizon, double gamma) const {
        RolloutConfig c;
        c.horizon = horizon;
        c.discount = gamma;
        c.predict = PredictMode::mean;
        c.stochastic_policy = false;
        return c;
    }
};

ReturnGrid grid_from(std::size_t horizon, std::size_t particles, std::size_t heads, std::vector<double> values) {
    ReturnGrid g(horizon, particles, heads, 0.99);
    g.samples = std::move(values);
    std::fill(g.alive.begin(), g.alive.end(), 1);
    return g;
}

}  // namespace

TEST(SampleReturns, ZeroHorizonIsTdTarget) {
    Fixture f;
    const auto g = sample_returns(f.t, f.policy, f.dynamics, f.critic, f.config(0, 0.9), 1);
    ASSERT_EQ(g.samples.size(), 1u);
    const double s1 = f.t.next_obs[0];
    EXPECT_NEAR(g.at(0, 0, 0), f.t.reward + 0.9 * f.q(s1, f.pi(s1)), 1e-12);
}

TEST(SampleReturns, ZeroDiscountGivesReward) {
    Fixture f;
    const auto g = sample_returns(f.t, f.policy, f.dynamics, f.critic, f.config(4, 0.0), 1);
    for (double v : g.samples) EXPECT_EQ(v, f.t.reward);
}

TEST(SampleReturns, HandRolledTrajectory) {
    Fixture f;
    const double gamma = 0.9;
    const double x1 = f.t.next_obs[0], a1 = f.pi(x1);
    const double x2 = f.model_next(x1, a1), a2 = f.pi(x2), r1 = f.model_reward(x1, a1);
    const double x3 = f.model_next(x2, a2), a3 = f.pi(x3), r2 = f.model_reward(x2, a2);
    const double expected[3] = {
        f.t.reward + gamma * f.q(x1, a1),
        f.t.reward + gamma * r1 + gamma * gamma * f.q(x2, a2),
        f.t.reward + gamma * r1 + gamma * gamma * r2 + gamma * gamma * gamma * f.q(x3, a3),
    };
    for (auto mode : {SamplingMode::single_pass, SamplingMode::independent_per_h}) {
        auto cfg = f.config(2, gamma);
        cfg.mode = mode;
        const auto g = sample_returns(f.t, f.policy, f.dynamics, f.critic, cfg, 3);
        for (std::size_t h = 0; h <= 2; ++h) EXPECT_NEAR(g.at(h, 0, 0), expected[h], 1e-6) << to_string(mode) << " h=" << h;
    }
}

TEST(SampleReturns, TerminalTransitionNeverBootstraps) {
    Fixture f;
    f.t.done = true;
    const auto g = sample_returns(f.t, f.policy, f.dynamics, f.critic, f.config(3, 0.9), 1);
    for (double v : g.samples) EXPECT_EQ(v, f.t.reward);
    EXPECT_TRUE(g.alive_at(0, 0));
    EXPECT_FALSE(g.alive_at(1, 0));
}

TEST(SampleReturns, ModelTerminationStopsAccumulation) {
    Fixture f;
    auto cfg = f.config(3, 0.9);
    cfg.terminated = [](std::span<const double> s) { return s[0] > 0.0; };
    const auto g = sample_returns(f.t, f.policy, f.dynamics, f.critic, cfg, 1);
    const double x1 = f.t.next_obs[0], a1 = f.pi(x1);
    const double stopped = f.t.reward + 0.9 * f.model_reward(x1, a1);
    for (std::size_t h = 1; h <= 3; ++h) EXPECT_NEAR(g.at(h, 0, 0), stopped, 1e-12);
}

TEST(SampleReturns, DimensionMismatchThrows) {
    Fixture f;
    f.t.obs = {0.1, 0.2};
    try {
        sample_returns(f.t, f.policy, f.dynamics, f.critic, f.config(1, 0.9), 1);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_EQ(e.tag(), "input-shape");
    }
}

TEST(SampleReturns, PureInSeed) {
    Fixture f;
    auto cfg = f.config(3, 0.9);
    cfg.stochastic_policy = true;
    const auto a = sample_returns(f.t, f.policy, f.dynamics, f.critic, cfg, 42);
    const auto b = sample_returns(f.t, f.policy, f.dynamics, f.critic, cfg, 42);
    const auto c = sample_returns(f.t, f.policy, f.dynamics, f.critic, cfg, 43);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
}

TEST(Likelihood, PooledVarianceFixture) {
    // h = 0 with K = 2, M = 2: member 1 {1, 3}, member 2 {5, 7}.
    const auto g = grid_from(0, 2, 2, {1, 3, 5, 7});
    const auto p = likelihood_params(g);
    EXPECT_DOUBLE_EQ(p.mu[0], 4.0);
    EXPECT_DOUBLE_EQ(p.var_value_part[0], 1.0);
    EXPECT_DOUBLE_EQ(p.var_model_part[0], 4.0);
    EXPECT_DOUBLE_EQ(p.var[0], 5.0);
    EXPECT_DOUBLE_EQ(p.var[0], testkit::population_variance(std::vector<double>{1, 3, 5, 7}));
    EXPECT_DOUBLE_EQ(variance_ratio(p)[0], 0.2);
}

TEST(Likelihood, IdenticalSamplesAreFloored) {
    const auto p = likelihood_params(grid_from(1, 3, 2, std::vector<double>(12, 2.5)));
    for (std::size_t h = 0; h < 2; ++h) {
        EXPECT_EQ(p.mu[h], 2.5);
        EXPECT_EQ(p.var[h], variance_floor);
    }
}

TEST(Likelihood, SingleParticleHasNoModelVariance) {
    const auto p = likelihood_params(grid_from(0, 1, 3, {1.0, 2.0, 6.0}));
    EXPECT_EQ(p.var_model_part[0], 0.0);
    EXPECT_DOUBLE_EQ(p.var[0], p.var_value_part[0]);
    EXPECT_DOUBLE_EQ(variance_ratio(p)[0], 1.0);
}

TEST(Likelihood, SingleHeadHasNoValueVariance) {
    const auto p = likelihood_params(grid_from(0, 3, 1, {1.0, 2.0, 6.0}));
    EXPECT_EQ(p.var_value_part[0], 0.0);
    EXPECT_EQ(variance_ratio(p)[0], 0.0);
}

TEST(Posterior, SingleHorizonEqualsLikelihood) {
    const double mu[] = {5.0}, var[] = {4.0};
    const auto post = posterior(likelihood_from_moments(mu, var));
    EXPECT_DOUBLE_EQ(post.mean, 5.0);
    EXPECT_DOUBLE_EQ(post.var, 4.0);
    EXPECT_EQ(post.weights, std::vector<double>{1.0});
}

TEST(Posterior, EqualVariancesAverage) {
    const double mu[] = {2.0, 4.0}, var[] = {1.0, 1.0};
    const auto post = posterior(likelihood_from_moments(mu, var));
    EXPECT_DOUBLE_EQ(post.mean, 3.0);
    EXPECT_DOUBLE_EQ(post.var, 0.5);
    EXPECT_EQ(post.weights, (std::vector<double>{0.5, 0.5}));
}

TEST(Posterior, ThreeHorizonFixtureMatchesQuadrature) {
    const double mu[] = {1.0, 2.0, 3.0}, var[] = {1.0, 4.0, 0.25};
    const auto post = posterior(likelihood_from_moments(mu, var));
    EXPECT_NEAR(post.weights[0], 4.0 / 21.0, 1e-15);
    EXPECT_NEAR(post.weights[1], 1.0 / 21.0, 1e-15);
    EXPECT_NEAR(post.weights[2], 16.0 / 21.0, 1e-15);
    const auto oracle = testkit::gaussian_product_by_quadrature(mu, var);
    EXPECT_NEAR(post.mean, oracle.mean, 1e-6);
    EXPECT_NEAR(post.var, oracle.var, 1e-6);
    EXPECT_NEAR(post.mean, 2.5714, 1e-4);
    EXPECT_NEAR(post.var, 0.1905, 1e-4);
    EXPECT_NEAR(post.expected_horizon, (1.0 * 1.0 + 2.0 * 16.0) / 21.0, 1e-15);
}

TEST(Posterior, RandomInstancesMatchQuadrature) {
    Rng rng = make_rng(2024);
    for (int i = 0; i < 20; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(uniform(rng, 0.0, 11.0));
        std::vector<double> mu(n), var(n);
        for (std::size_t h = 0; h < n; ++h) {
            mu[h] = uniform(rng, -5.0, 5.0);
            var[h] = std::exp(uniform(rng, std::log(0.05), std::log(20.0)));
        }
        const auto post = posterior(likelihood_from_moments(mu, var));
        const auto oracle = testkit::gaussian_product_by_quadrature(mu, var);
        EXPECT_NEAR(post.mean, oracle.mean, 1e-6);
        EXPECT_NEAR(post.var, oracle.var, 1e-6);
        double total = 0.0;
        for (double w : post.weights) total += w;
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(TargetEstimate, LcbWithZeroPsiIsMap) {
    const double mu[] = {1.0, 2.0, 3.0}, var[] = {1.0, 4.0, 0.25};
    const auto post = posterior(likelihood_from_moments(mu, var));
    TargetEstimatorConfig lcb{EstimatorKind::lcb, 0.0};
    TargetEstimatorConfig map{EstimatorKind::map};
    EXPECT_EQ(target_estimate(post, lcb), target_estimate(post, map));
    EXPECT_EQ(target_estimate(post, map), post.mean);
}

TEST(TargetEstimate, LcbOnThreeHorizonFixture) {
    PosteriorEstimate post;
    post.mean = 2.5714;
    post.var = 0.1905;
    EXPECT_NEAR(target_estimate(post, {EstimatorKind::lcb, 2.0}), 1.6985, 1e-4);
}

TEST(TargetEstimate, QuantileOrderStatistic) {
    const auto g = grid_from(1, 1, 2, {4.0, 1.0, 3.0, 2.0});
    TargetEstimatorConfig c{EstimatorKind::quantile};
    c.alpha = 0.5;
    EXPECT_EQ(target_estimate(g, c), 2.0);
    c.alpha = 0.1;  // floor(0.4) = 0 clamps to the smallest sample
    EXPECT_EQ(target_estimate(g, c), 1.0);
    c.alpha = 1.0;
    EXPECT_EQ(target_estimate(g, c), 4.0);
}

TEST(TargetEstimate, QuantileOnEmptyGridThrows) {
    TargetEstimatorConfig c{EstimatorKind::quantile};
    EXPECT_THROW(target_estimate(ReturnGrid{}, c), EmptyInputError);
}

TEST(TargetEstimate, LambdaZeroUsesOnlyModelFreeSamples) {
    Rng rng = make_rng(12);
    ReturnGrid g(3, 4, 5, 0.99);
    for (auto& v : g.samples) v = uniform(rng, -3.0, 3.0);
    TargetEstimatorConfig c{EstimatorKind::fixed_lambda, 2.0, 0.0};
    std::vector<double> r0;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t m = 0; m < 5; ++m) r0.push_back(g.at(0, k, m));
    double mean = 0.0;
    for (double v : r0) mean += v;
    mean /= static_cast<double>(r0.size());
    const double expected = mean - 2.0 * std::sqrt(testkit::population_variance(r0));
    EXPECT_NEAR(target_estimate(g, c), expected, 1e-12);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t m = 0; m < 5; ++m) g.at(2, k, m) += 100.0;
    EXPECT_NEAR(target_estimate(g, c), expected, 1e-12);
}

TEST(TargetEstimate, LambdaWeightsAreNormalizedGeometric) {
    const auto w = lambda_weights(3, 0.5);
    const double norm = 0.5 / (1.0 - 0.0625);
    for (std::size_t h = 0; h <= 3; ++h) EXPECT_NEAR(w[h], norm * std::pow(0.5, h), 1e-15);
}

TEST(TargetEstimate, UniformWeightsWithZeroPsiIsGrandMean) {
    const auto g = grid_from(1, 2, 1, {1.0, 2.0, 3.0, 6.0});
    EXPECT_DOUBLE_EQ(target_estimate(g, {EstimatorKind::fixed_uniform, 0.0}), 3.0);
}

TEST(TargetEstimate, PosteriorOverloadRejectsGridKinds) {
    EXPECT_THROW(target_estimate(PosteriorEstimate{}, {EstimatorKind::quantile}), ConfigError);
}

TEST(TargetEstimate, LargePsiLowersTarget) {
    const auto g = grid_from(1, 2, 2, {1, 3, 5, 7, 2, 4, 6, 9});
    EXPECT_LT(target_estimate(g, {EstimatorKind::lcb, 100.0}), target_estimate(g, {EstimatorKind::lcb, 0.0}));
}
