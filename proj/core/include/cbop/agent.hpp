#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbop/adam.hpp"
#include "cbop/bayes_mve.hpp"
#include "cbop/dataset.hpp"
#include "cbop/dynamics.hpp"
#include "cbop/env.hpp"
#include "cbop/policy.hpp"
#include "cbop/q_ensemble.hpp"

namespace cbop {

enum class ActorObjective { mean, min };

struct TrainConfig {
    std::size_t horizon = 10;
    double gamma = 0.99;
    TargetEstimatorConfig estimator;
    SamplingMode sampling = SamplingMode::single_pass;
    std::size_t num_heads = 20;
    std::size_t batch_size = 256;
    std::size_t epochs = 150;
    std::size_t steps_per_epoch = 1000;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double target_update_rate = 5e-3;
    double entropy_temperature = 0.05;
    double eta = 1.0;  // diversity penalty coefficient
    ActorObjective actor_objective = ActorObjective::mean;
    std::vector<std::size_t> policy_hidden = {256, 256};
    std::vector<std::size_t> critic_hidden = {256, 256};
    Activation activation = Activation::relu;

    std::size_t bc_epochs = 50;
    std::size_t bc_batch_size = 256;
    double bc_lr = 1e-3;
    std::size_t fqe_rounds = 50;
    std::size_t fqe_steps_per_round = 200;
    double fqe_lr = 3e-4;

    std::size_t eval_episodes = 10;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    DynamicsConfig dynamics;

    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double mean_target = 0.0;
    double mean_expected_horizon = 0.0;
    double eval_return = 0.0;
    double normalized_score = 0.0;
    std::vector<double> mean_weights;  // per horizon
};

struct AgentState {
    TrainConfig config;
    std::string env_id;
    PolicyNet policy;
    QEnsemble critic;
    DynamicsEnsemble dynamics;
    AdamState actor_opt;
    std::vector<AdamState> critic_opt;
    std::size_t epoch = 0;
    std::vector<EpochMetrics> log;
};

/// Fresh policy and critic for `env`, seeded from config.seed; takes ownership of the frozen dynamics.
AgentState make_agent(const Environment& env, const TrainConfig& config, DynamicsEnsemble dynamics);

struct BcConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 256;
    double lr = 1e-3;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct BcReport {
    double holdout_mse_before = 0.0;
    double holdout_mse_after = 0.0;
};

BcReport bc_pretrain(PolicyNet& policy, const Dataset& data, const BcConfig& config);

enum class NextAction { recorded, policy };

struct FqeConfig {
    std::size_t rounds = 50;
    std::size_t steps_per_round = 200;
    std::size_t batch_size = 256;
    double lr = 3e-4;
    double gamma = 0.99;
    NextAction next_action = NextAction::recorded;
    std::uint64_t seed = 0;
};

struct FqeReport {
    std::vector<double> round_loss;  // mean regression loss of the last step of each round
};

/// Fitted Q-evaluation. With NextAction::recorded the logged successor
/// action is used where the episode continues and the deterministic policy
/// head elsewhere; NextAction::policy always uses the policy.
FqeReport fqe_pretrain(QEnsemble& critic, const PolicyNet& policy, const Dataset& data, const FqeConfig& config);

/// One pass of steps_per_epoch updates; evaluates on `env` when given.
EpochMetrics cbop_train_epoch(AgentState& agent, const Dataset& data, const Environment* env);

/// Conservative target and expected horizon for every transition in `rows`.
struct TargetBatch {
    std::vector<double> targets;
    std::vector<double> expected_horizon;
    std::vector<std::vector<double>> weights;
};
TargetBatch compute_targets(const AgentState& agent, const Dataset& data, std::span<const std::size_t> rows,
                            std::uint64_t epoch, std::uint64_t first_index);

RolloutConfig rollout_config(const TrainConfig& config, const std::string& env_id);

struct EvalResult {
    double mean_return = 0.0;
    double normalized_score = 0.0;
    std::vector<double> returns;
};

EvalResult evaluate_policy(const PolicyNet& policy, const Environment& env, std::size_t episodes, std::uint64_t seed);

struct GapRow {
    std::size_t index = 0;
    double predicted = 0.0;
    double monte_carlo = 0.0;
};

struct GapResult {
    double mean = 0.0;
    double max = 0.0;
    std::vector<GapRow> rows;
};

/// Discounted return of the deterministic policy from `obs` in the true
/// environment, until termination or until the discount falls below 1e-4.
double monte_carlo_return(const PolicyNet& policy, const Environment& env, std::span<const double> obs,
                          double gamma);

/// V(s) - MC(s) over `states` dataset states drawn with `seed`.
GapResult conservatism_gap(const PolicyNet& policy, const QEnsemble& critic, const Environment& env,
                           const Dataset& data, std::size_t states, double gamma, std::uint64_t seed);

/// Spearman correlation of two rankings given as 1-based ranks per item.
double spearman(std::span<const std::size_t> rank_a, std::span<const std::size_t> rank_b);

/// 1-based ranks for scores sorted in descending order (ties keep input order).
std::vector<std::size_t> descending_ranks(std::span<const double> scores);

struct RankResult {
    std::vector<double> scores;      // E_{s0 in D}[Q(s0, pi(s0))] per policy
    std::vector<std::size_t> ranks;  // 1 = best
    std::optional<double> spearman;
};

struct RankConfig {
    FqeConfig fqe;
    std::size_t num_heads = 2;
    std::vector<std::size_t> hidden = {64, 64};
    Activation activation = Activation::relu;
};

RankResult fqe_rank_hyperparams(const std::vector<PolicyNet>& policies, const Dataset& data, const RankConfig& config,
                                const std::optional<std::vector<std::size_t>>& reference_ranks);

}  // namespace cbop
