#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cbop/dataset.hpp"
#include "cbop/dynamics.hpp"
#include "cbop/policy.hpp"
#include "cbop/q_ensemble.hpp"

namespace cbop {

inline constexpr double variance_floor = 1e-8;

/// Sampled h-step returns R[h][k][m]: horizon h, dynamics particle k, value head m.
struct ReturnGrid {
    std::size_t horizon = 0;
    std::size_t particles = 0;
    std::size_t heads = 0;
    double discount = 0.99;
    std::vector<double> samples;       // (horizon + 1) * particles * heads
    std::vector<std::uint8_t> alive;   // (horizon + 1) * particles

    ReturnGrid() = default;
    ReturnGrid(std::size_t horizon, std::size_t particles, std::size_t heads, double discount);

    double& at(std::size_t h, std::size_t k, std::size_t m) { return samples[(h * particles + k) * heads + m]; }
    double at(std::size_t h, std::size_t k, std::size_t m) const { return samples[(h * particles + k) * heads + m]; }
    bool alive_at(std::size_t h, std::size_t k) const { return alive[h * particles + k] != 0; }
};

enum class SamplingMode { single_pass, independent_per_h };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& name);

struct RolloutConfig {
    std::size_t horizon = 10;
    double discount = 0.99;
    SamplingMode mode = SamplingMode::single_pass;
    PredictMode predict = PredictMode::sample;
    bool stochastic_policy = true;                           // false: deterministic head everywhere
    std::function<bool(std::span<const double>)> terminated;  // empty: never terminates
};

/// Particle rollouts for one transition, pure in (inputs, seed).
ReturnGrid sample_returns(const Transition& t, const PolicyNet& policy, const DynamicsEnsemble& dynamics,
                          const QEnsemble& critic, const RolloutConfig& config, std::uint64_t seed);

struct LikelihoodParams {
    std::vector<double> mu;
    std::vector<double> var;
    std::vector<double> precision;
    std::vector<double> var_value_part;  // A: mean over particles of the variance over heads
    std::vector<double> var_model_part;  // B: variance over particles of the per-particle mean

    std::size_t size() const { return mu.size(); }
};

LikelihoodParams likelihood_params(const ReturnGrid& grid);

/// Builds params from explicit means and variances (variance floored).
LikelihoodParams likelihood_from_moments(std::span<const double> mu, std::span<const double> var);

struct PosteriorEstimate {
    double mean = 0.0;
    double var = 0.0;
    std::vector<double> weights;
    double expected_horizon = 0.0;
};

PosteriorEstimate posterior(const LikelihoodParams& params);

enum class EstimatorKind { lcb, map, quantile, fixed_lambda, fixed_uniform };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct TargetEstimatorConfig {
    EstimatorKind kind = EstimatorKind::lcb;
    double psi = 2.0;
    double lambda = 0.5;
    double alpha = 0.1;

    void validate() const;
};

/// Normalized geometric weights (1 - l) / (1 - l^(H+1)) * l^h, h = 0..H.
std::vector<double> lambda_weights(std::size_t horizon, double lambda);

double target_estimate(const ReturnGrid& grid, const TargetEstimatorConfig& config);
/// lcb and map only.
double target_estimate(const PosteriorEstimate& post, const TargetEstimatorConfig& config);

/// A / (A + B) per horizon; 0 when both parts vanish.
std::vector<double> variance_ratio(const LikelihoodParams& params);

}  // namespace cbop
