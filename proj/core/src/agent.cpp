#include "cbop/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "cbop/errors.hpp"
#include "cbop/parallel.hpp"

namespace cbop {

namespace {

constexpr double divergence_threshold = 1e8;

Matrix gather_obs(const Dataset& data, std::span<const std::size_t> rows, bool next = false) {
    Matrix m(rows.size(), data.obs_dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = next ? data.next_obs_row(rows[r]) : data.obs_row(rows[r]);
        for (std::size_t j = 0; j < data.obs_dim; ++j) m(r, j) = src[j];
    }
    return m;
}

Matrix gather_actions(const Dataset& data, std::span<const std::size_t> rows) {
    Matrix m(rows.size(), data.act_dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = data.action_row(rows[r]);
        for (std::size_t j = 0; j < data.act_dim; ++j) m(r, j) = src[j];
    }
    return m;
}

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(count);
    for (auto& r : rows) r = pick(rng);
    return rows;
}

bool finite(double x) { return std::isfinite(x); }

// Mean-squared regression step of every online head toward per-head targets (n x M).
double regress_heads(QEnsemble& critic, std::vector<AdamState>& opts, const Matrix& input, const Matrix& targets,
                     const QEnsemble::Diversity* diversity, double eta) {
    const std::size_t n = input.rows();
    double loss = 0.0;
    std::vector<std::vector<double>> grads(critic.num_heads());
    for (std::size_t m = 0; m < critic.num_heads(); ++m) {
        const DenseNet& head = critic.head(QSet::online, m);
        DenseNet::Cache cache;
        const Matrix q = head.forward(input, cache);
        Matrix upstream(n, 1);
        double head_loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double err = q(r, 0) - targets(r, m);
            head_loss += err * err;
            upstream(r, 0) = 2.0 * err / static_cast<double>(n);
        }
        loss += head_loss / static_cast<double>(n);
        grads[m] = head.backward(cache, upstream).params;
        if (diversity && eta != 0.0)
            for (std::size_t i = 0; i < grads[m].size(); ++i) grads[m][i] += eta * diversity->grads[m][i];
    }
    loss /= static_cast<double>(critic.num_heads());
    if (!finite(loss) || loss > divergence_threshold) {
        std::ostringstream msg;
        msg << "critic regression loss " << loss << " exceeds the divergence threshold";
        throw DivergenceError(msg.str());
    }
    for (std::size_t m = 0; m < critic.num_heads(); ++m)
        adam_update(critic.head(QSet::online, m).params(), grads[m], opts[m]);
    return loss;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    estimator.validate();
    if (num_heads < 2) throw ConfigError("num_heads must be at least 2");
    if (batch_size == 0 || steps_per_epoch == 0) throw ConfigError("batch_size and steps_per_epoch must be positive");
    if (!(actor_lr >= 0.0 && critic_lr >= 0.0 && bc_lr >= 0.0 && fqe_lr >= 0.0))
        throw ConfigError("learning rates must be non-negative");
    if (!(target_update_rate > 0.0 && target_update_rate <= 1.0))
        throw ConfigError("target_update_rate must lie in (0, 1]");
    if (!(entropy_temperature >= 0.0)) throw ConfigError("entropy_temperature must be non-negative");
    if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
    if (dynamics.num_elites == 0 || dynamics.num_elites > dynamics.num_members)
        throw ConfigError("num_elites must lie in [1, num_members]");
}

AgentState make_agent(const Environment& env, const TrainConfig& config, DynamicsEnsemble dynamics) {
    config.validate();
    if (dynamics.num_members() > 0 && (dynamics.obs_dim() != env.obs_dim() || dynamics.act_dim() != env.act_dim()))
        throw ShapeError("dynamics ensemble does not match the environment dimensions");
    AgentState a;
    a.config = config;
    a.env_id = env.id();
    Rng policy_rng = make_rng(config.seed, {0xa9e7});
    a.policy = PolicyNet(env.obs_dim(), env.action_low(), env.action_high(), config.policy_hidden, config.activation,
                         config.entropy_temperature, policy_rng);
    Rng critic_rng = make_rng(config.seed, {0xc417});
    a.critic = QEnsemble(env.obs_dim(), env.act_dim(), config.num_heads, config.critic_hidden, config.activation,
                         config.target_update_rate, critic_rng);
    a.dynamics = std::move(dynamics);
    a.actor_opt = AdamState(a.policy.net().num_params(), config.actor_lr);
    for (std::size_t m = 0; m < config.num_heads; ++m)
        a.critic_opt.emplace_back(a.critic.head(QSet::online, m).num_params(), config.critic_lr);
    return a;
}

BcReport bc_pretrain(PolicyNet& policy, const Dataset& data, const BcConfig& config) {
    if (data.size() == 0) throw EmptyInputError("behavior cloning needs a non-empty dataset");
    if (data.obs_dim != policy.obs_dim() || data.act_dim != policy.act_dim())
        throw ShapeError("policy does not match the dataset dimensions");
    std::vector<std::size_t> train, holdout;
    if (data.size() >= 10) {
        split_rows(data.size(), config.holdout_fraction, derive_seed(config.seed, {0xbc01}), train, holdout);
    } else {
        train.resize(data.size());
        std::iota(train.begin(), train.end(), std::size_t{0});
        holdout = train;
    }
    const Matrix hold_obs = gather_obs(data, holdout), hold_act = gather_actions(data, holdout);
    BcReport report;
    report.holdout_mse_before = policy.bc_loss(hold_obs, hold_act, nullptr);
    AdamState opt(policy.net().num_params(), config.lr);
    const std::size_t batch = std::max<std::size_t>(1, std::min(config.batch_size, train.size()));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng = make_rng(config.seed, {0xbc02, epoch});
        std::vector<std::size_t> order = train;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::span<const std::size_t> rows(order.data() + start, std::min(batch, order.size() - start));
            std::vector<double> grad;
            policy.bc_loss(gather_obs(data, rows), gather_actions(data, rows), &grad);
            adam_update(policy.net().params(), grad, opt);
        }
    }
    report.holdout_mse_after = policy.bc_loss(hold_obs, hold_act, nullptr);
    return report;
}

FqeReport fqe_pretrain(QEnsemble& critic, const PolicyNet& policy, const Dataset& data, const FqeConfig& config) {
    if (config.rounds == 0) throw ConfigError("FQE needs at least one round");
    if (data.size() == 0) throw EmptyInputError("FQE needs a non-empty dataset");
    if (data.obs_dim != critic.obs_dim() || data.act_dim != critic.act_dim())
        throw ShapeError("critic does not match the dataset dimensions");
    const std::size_t M = critic.num_heads();
    std::vector<AdamState> opts;
    for (std::size_t m = 0; m < M; ++m) opts.emplace_back(critic.head(QSet::online, m).num_params(), config.lr);
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
    FqeReport report;
    critic.sync_targets();
    for (std::size_t round = 0; round < config.rounds; ++round) {
        double loss = 0.0;
        for (std::size_t step = 0; step < config.steps_per_round; ++step) {
            Rng rng = make_rng(config.seed, {0xf0e1, round, step});
            const auto rows = sample_rows(data.size(), batch, rng);
            const Matrix obs = gather_obs(data, rows), act = gather_actions(data, rows);
            const Matrix next = gather_obs(data, rows, true);
            Matrix next_act = policy.deterministic_actions(next);
            if (config.next_action == NextAction::recorded)
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const auto succ = data.successor(rows[r]);
                    if (succ < 0) continue;
                    const auto a = data.action_row(static_cast<std::size_t>(succ));
                    for (std::size_t j = 0; j < data.act_dim; ++j) next_act(r, j) = a[j];
                }
            const Matrix q_next = critic.q_values(QSet::target, next, next_act);
            Matrix targets(rows.size(), M);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const double cont = data.done[rows[r]] ? 0.0 : config.gamma;
                for (std::size_t m = 0; m < M; ++m) targets(r, m) = data.rewards[rows[r]] + cont * q_next(r, m);
            }
            loss = regress_heads(critic, opts, critic.make_input(obs, act), targets, nullptr, 0.0);
        }
        critic.sync_targets();
        report.round_loss.push_back(loss);
    }
    return report;
}

RolloutConfig rollout_config(const TrainConfig& config, const std::string& env_id) {
    RolloutConfig rc;
    rc.horizon = config.horizon;
    rc.discount = config.gamma;
    rc.mode = config.sampling;
    rc.predict = PredictMode::sample;
    rc.stochastic_policy = true;
    const auto ids = env_ids();
    if (std::find(ids.begin(), ids.end(), env_id) != ids.end()) {
        std::shared_ptr<const Environment> env = make_env(env_id);
        rc.terminated = [env](std::span<const double> obs) { return env->terminated(obs); };
    }
    return rc;
}

TargetBatch compute_targets(const AgentState& agent, const Dataset& data, std::span<const std::size_t> rows,
                            std::uint64_t epoch, std::uint64_t first_index) {
    const RolloutConfig rc = rollout_config(agent.config, agent.env_id);
    TargetBatch out;
    out.targets.resize(rows.size());
    out.expected_horizon.resize(rows.size());
    out.weights.resize(rows.size());
    parallel_for(rows.size(), agent.config.threads, [&](std::size_t i) {
        const Transition t = data.transition(rows[i]);
        const auto grid = sample_returns(t, agent.policy, agent.dynamics, agent.critic, rc,
                                         derive_seed(agent.config.seed, {epoch, first_index + i}));
        const PosteriorEstimate post = posterior(likelihood_params(grid));
        const auto kind = agent.config.estimator.kind;
        out.targets[i] = (kind == EstimatorKind::lcb || kind == EstimatorKind::map)
                             ? target_estimate(post, agent.config.estimator)
                             : target_estimate(grid, agent.config.estimator);
        out.expected_horizon[i] = post.expected_horizon;
        out.weights[i] = post.weights;
    });
    return out;
}

EpochMetrics cbop_train_epoch(AgentState& agent, const Dataset& data, const Environment* env) {
    const TrainConfig& cfg = agent.config;
    if (data.size() == 0) throw EmptyInputError("training needs a non-empty dataset");
    if (data.obs_dim != agent.critic.obs_dim() || data.act_dim != agent.critic.act_dim())
        throw ShapeError("agent does not match the dataset dimensions");
    const std::size_t M = agent.critic.num_heads();
    const std::size_t n = cfg.batch_size;
    const std::uint64_t epoch = agent.epoch;

    EpochMetrics metrics;
    metrics.mean_weights.assign(cfg.horizon + 1, 0.0);
    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
        Rng batch_rng = make_rng(cfg.seed, {0xba7c, epoch, step});
        const auto rows = sample_rows(data.size(), n, batch_rng);
        const TargetBatch tb = compute_targets(agent, data, rows, epoch, step * n);

        double mean_target = 0.0, mean_horizon = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            mean_target += tb.targets[r] / static_cast<double>(n);
            mean_horizon += tb.expected_horizon[r] / static_cast<double>(n);
            for (std::size_t h = 0; h <= cfg.horizon; ++h)
                metrics.mean_weights[h] += tb.weights[r][h] / static_cast<double>(n * cfg.steps_per_epoch);
        }
        if (!finite(mean_target) || std::abs(mean_target) > divergence_threshold) {
            std::ostringstream msg;
            msg << "mean target " << mean_target << " at epoch " << epoch + 1 << " step " << step
                << " exceeds the divergence threshold";
            throw DivergenceError(msg.str());
        }

        const Matrix obs = gather_obs(data, rows), act = gather_actions(data, rows);
        Matrix targets(n, M);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t m = 0; m < M; ++m) targets(r, m) = tb.targets[r];
        std::optional<QEnsemble::Diversity> div;
        if (cfg.eta != 0.0) div = agent.critic.diversity_penalty(obs, act);
        const double critic_loss =
            regress_heads(agent.critic, agent.critic_opt, agent.critic.make_input(obs, act), targets,
                          div ? &*div : nullptr, cfg.eta);
        agent.critic.soft_update();

        Rng actor_rng = make_rng(cfg.seed, {0xac70, epoch, step});
        const auto sample = agent.policy.sample_reparam(obs, actor_rng);
        const Matrix x = agent.critic.make_input(obs, sample.actions);
        const std::size_t act_dim = agent.critic.act_dim(), obs_dim = agent.critic.obs_dim();
        Matrix q(n, M);
        std::vector<Matrix> dq(M);
        for (std::size_t m = 0; m < M; ++m) {
            DenseNet::Cache cache;
            const DenseNet& head = agent.critic.head(QSet::online, m);
            const Matrix out = head.forward(x, cache);
            dq[m] = head.backward(cache, Matrix(n, 1, 1.0)).input;
            for (std::size_t r = 0; r < n; ++r) q(r, m) = out(r, 0);
        }
        Matrix d_action(n, act_dim);
        double actor_loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double value = 0.0;
            if (cfg.actor_objective == ActorObjective::mean) {
                for (std::size_t m = 0; m < M; ++m) {
                    value += q(r, m) / static_cast<double>(M);
                    for (std::size_t j = 0; j < act_dim; ++j)
                        d_action(r, j) -= dq[m](r, obs_dim + j) / static_cast<double>(M * n);
                }
            } else {
                std::size_t best = 0;
                for (std::size_t m = 1; m < M; ++m)
                    if (q(r, m) < q(r, best)) best = m;
                value = q(r, best);
                for (std::size_t j = 0; j < act_dim; ++j) d_action(r, j) = -dq[best](r, obs_dim + j) / static_cast<double>(n);
            }
            actor_loss += (agent.policy.entropy_temperature() * sample.log_prob[r] - value) / static_cast<double>(n);
        }
        if (!finite(actor_loss)) throw DivergenceError("actor loss is not finite");
        const auto grad =
            agent.policy.reparam_gradient(sample, d_action, agent.policy.entropy_temperature() / static_cast<double>(n));
        adam_update(agent.policy.net().params(), grad, agent.actor_opt);

        const double steps = static_cast<double>(cfg.steps_per_epoch);
        metrics.actor_loss += actor_loss / steps;
        metrics.critic_loss += critic_loss / steps;
        metrics.mean_target += mean_target / steps;
        metrics.mean_expected_horizon += mean_horizon / steps;
    }

    agent.epoch += 1;
    metrics.epoch = agent.epoch;
    if (env && cfg.eval_episodes > 0) {
        const auto eval = evaluate_policy(agent.policy, *env, cfg.eval_episodes, derive_seed(cfg.seed, {0xe7a1}));
        metrics.eval_return = eval.mean_return;
        metrics.normalized_score = eval.normalized_score;
    }
    agent.log.push_back(metrics);
    return metrics;
}

EvalResult evaluate_policy(const PolicyNet& policy, const Environment& env, std::size_t episodes, std::uint64_t seed) {
    if (policy.obs_dim() != env.obs_dim() || policy.act_dim() != env.act_dim())
        throw ShapeError("policy does not match the environment dimensions");
    EvalResult result;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = make_rng(seed, {ep});
        std::vector<double> s = env.initial_state(rng);
        double ret = 0.0;
        for (std::size_t t = 0; t < env.max_episode_steps(); ++t) {
            auto step = env.step(s, policy.deterministic_action(s));
            ret += step.reward;
            s = std::move(step.next_obs);
            if (step.terminated) break;
        }
        result.returns.push_back(ret);
    }
    if (episodes > 0)
        result.mean_return = std::accumulate(result.returns.begin(), result.returns.end(), 0.0) /
                             static_cast<double>(episodes);
    result.normalized_score = env.normalized_score(result.mean_return);
    return result;
}

double monte_carlo_return(const PolicyNet& policy, const Environment& env, std::span<const double> obs,
                          double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("Monte Carlo discount must lie in [0, 1)");
    std::vector<double> s(obs.begin(), obs.end());
    double ret = 0.0, disc = 1.0;
    while (disc >= 1e-4) {
        auto step = env.step(s, policy.deterministic_action(s));
        ret += disc * step.reward;
        disc *= gamma;
        s = std::move(step.next_obs);
        if (step.terminated) break;
    }
    return ret;
}

GapResult conservatism_gap(const PolicyNet& policy, const QEnsemble& critic, const Environment& env,
                           const Dataset& data, std::size_t states, double gamma, std::uint64_t seed) {
    if (!env.supports_reset_to_state()) throw UnsupportedEnvError(env.id() + " cannot be reset to dataset states");
    if (data.size() == 0) throw EmptyInputError("conservatism gap needs dataset states");
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (states > 0 && states < rows.size()) {
        Rng rng = make_rng(seed, {0x9a9});
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(states);
    }
    GapResult result;
    result.max = -std::numeric_limits<double>::infinity();
    for (std::size_t i : rows) {
        const auto o = data.obs_row(i);
        const std::vector<double> s(o.begin(), o.end());
        const auto q = critic.q_values(QSet::online, s, policy.deterministic_action(s));
        GapRow row;
        row.index = i;
        row.predicted = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
        row.monte_carlo = monte_carlo_return(policy, env, s, gamma);
        const double gap = row.predicted - row.monte_carlo;
        result.mean += gap / static_cast<double>(rows.size());
        result.max = std::max(result.max, gap);
        result.rows.push_back(row);
    }
    return result;
}

double spearman(std::span<const std::size_t> rank_a, std::span<const std::size_t> rank_b) {
    if (rank_a.size() != rank_b.size()) throw ShapeError("rankings must have equal length");
    const std::size_t n = rank_a.size();
    if (n < 2) throw InsufficientDataError("Spearman correlation needs at least 2 items");
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(rank_a[i]) - static_cast<double>(rank_b[i]);
        d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

std::vector<std::size_t> descending_ranks(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> ranks(scores.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
    return ranks;
}

RankResult fqe_rank_hyperparams(const std::vector<PolicyNet>& policies, const Dataset& data, const RankConfig& config,
                                const std::optional<std::vector<std::size_t>>& reference_ranks) {
    if (policies.size() < 2) throw InsufficientDataError("ranking needs at least 2 policies");
    const auto init = data.initial_indices();
    if (init.size() < 2) throw InsufficientDataError("ranking needs at least 2 initial states in the dataset");
    const Matrix s0 = gather_obs(data, init);
    RankResult result;
    for (std::size_t p = 0; p < policies.size(); ++p) {
        Rng rng = make_rng(config.fqe.seed, {0x5a4e, p});
        QEnsemble evaluator(data.obs_dim, data.act_dim, config.num_heads, config.hidden, config.activation, 1.0, rng);
        FqeConfig fqe = config.fqe;
        fqe.next_action = NextAction::policy;
        fqe_pretrain(evaluator, policies[p], data, fqe);
        const Matrix q = evaluator.q_values(QSet::online, s0, policies[p].deterministic_actions(s0));
        double score = 0.0;
        for (double v : q.data()) score += v;
        result.scores.push_back(score / static_cast<double>(q.data().size()));
    }
    result.ranks = descending_ranks(result.scores);
    if (reference_ranks) result.spearman = spearman(result.ranks, *reference_ranks);
    return result;
}

}  // namespace cbop
