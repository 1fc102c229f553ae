#include "cbop/bayes_mve.hpp"

#include <algorithm>
#include <cmath>

#include "cbop/errors.hpp"

namespace cbop {

ReturnGrid::ReturnGrid(std::size_t horizon_, std::size_t particles_, std::size_t heads_, double discount_)
    : horizon(horizon_), particles(particles_), heads(heads_), discount(discount_),
      samples((horizon_ + 1) * particles_ * heads_, 0.0), alive((horizon_ + 1) * particles_, 0) {}

std::string to_string(SamplingMode mode) {
    return mode == SamplingMode::single_pass ? "single_pass" : "independent_per_h";
}

SamplingMode sampling_mode_from_string(const std::string& name) {
    if (name == "single_pass") return SamplingMode::single_pass;
    if (name == "independent_per_h") return SamplingMode::independent_per_h;
    throw ConfigError("unknown sampling mode '" + name + "'");
}

namespace {

void check_dims(const Transition& t, const PolicyNet& policy, const DynamicsEnsemble& dynamics,
                const QEnsemble& critic) {
    const std::size_t obs = critic.obs_dim(), act = critic.act_dim();
    if (policy.obs_dim() != obs || policy.act_dim() != act || dynamics.obs_dim() != obs ||
        dynamics.act_dim() != act || t.obs.size() != obs || t.next_obs.size() != obs || t.action.size() != act)
        throw ShapeError("policy, dynamics, critic and transition dimensions disagree", "input-shape");
}

std::vector<double> policy_action(const PolicyNet& policy, std::span<const double> obs, bool stochastic, Rng& rng) {
    return stochastic ? policy.sample_action(obs, rng) : policy.deterministic_action(obs);
}

struct Particle {
    std::vector<double> state;  // state reached after the last applied transition
    double ret = 0.0;           // discounted reward accumulated so far
    bool alive = true;
};

// Writes horizon-h samples for particle k bootstrapping from p.state; returns the bootstrap action.
std::vector<double> write_samples(ReturnGrid& grid, std::size_t h, std::size_t k, const Particle& p,
                                  const PolicyNet& policy, const QEnsemble& critic, const RolloutConfig& cfg,
                                  Rng& rng) {
    grid.alive[h * grid.particles + k] = (h == 0 || p.alive) ? 1 : 0;
    if (!p.alive) {
        for (std::size_t m = 0; m < grid.heads; ++m) grid.at(h, k, m) = p.ret;
        return {};
    }
    auto a = policy_action(policy, p.state, cfg.stochastic_policy, rng);
    const auto q = critic.q_values(QSet::target, p.state, a);
    const double g = std::pow(cfg.discount, static_cast<double>(h + 1));
    for (std::size_t m = 0; m < grid.heads; ++m) grid.at(h, k, m) = p.ret + g * q[m];
    return a;
}

void advance(Particle& p, std::size_t step, std::span<const double> action, std::size_t member,
             const DynamicsEnsemble& dynamics, const RolloutConfig& cfg, Rng& rng) {
    auto pred = dynamics.predict(member, p.state, action, cfg.predict, rng);
    p.ret += std::pow(cfg.discount, static_cast<double>(step)) * pred.reward;
    p.state = std::move(pred.next_obs);
    if (cfg.terminated && cfg.terminated(p.state)) p.alive = false;
}

Particle seed_particle(const Transition& t) {
    Particle p;
    p.state = t.next_obs;
    p.ret = t.reward;
    p.alive = !t.done;
    return p;
}

}  // namespace

ReturnGrid sample_returns(const Transition& t, const PolicyNet& policy, const DynamicsEnsemble& dynamics,
                          const QEnsemble& critic, const RolloutConfig& cfg, std::uint64_t seed) {
    check_dims(t, policy, dynamics, critic);
    const std::size_t K = dynamics.num_elites();
    if (K == 0) throw InvalidMemberError("dynamics ensemble has no elite members");
    const std::size_t H = cfg.horizon;
    ReturnGrid grid(H, K, critic.num_heads(), cfg.discount);
    const auto& elites = dynamics.elite_indices();

    if (cfg.mode == SamplingMode::single_pass) {
        for (std::size_t k = 0; k < K; ++k) {
            Rng rng = make_rng(seed, {k});
            Particle p = seed_particle(t);
            for (std::size_t h = 0; h <= H; ++h) {
                const auto a = write_samples(grid, h, k, p, policy, critic, cfg, rng);
                if (h < H && p.alive) advance(p, h + 1, a, elites[k], dynamics, cfg, rng);
            }
        }
        return grid;
    }

    for (std::size_t h = 0; h <= H; ++h)
        for (std::size_t k = 0; k < K; ++k) {
            Rng rng = make_rng(seed, {h, k});
            Particle p = seed_particle(t);
            for (std::size_t step = 1; step <= h && p.alive; ++step) {
                const auto a = policy_action(policy, p.state, cfg.stochastic_policy, rng);
                advance(p, step, a, elites[k], dynamics, cfg, rng);
            }
            write_samples(grid, h, k, p, policy, critic, cfg, rng);
        }
    return grid;
}

LikelihoodParams likelihood_params(const ReturnGrid& grid) {
    const std::size_t K = grid.particles, M = grid.heads;
    if (K == 0 || M == 0) throw EmptyInputError("return grid has no samples");
    LikelihoodParams p;
    std::vector<double> member_mean(K);
    for (std::size_t h = 0; h <= grid.horizon; ++h) {
        double a = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t m = 0; m < M; ++m) s += grid.at(h, k, m);
            const double mk = s / static_cast<double>(M);
            double v = 0.0;
            for (std::size_t m = 0; m < M; ++m) v += (grid.at(h, k, m) - mk) * (grid.at(h, k, m) - mk);
            a += v / static_cast<double>(M);
            member_mean[k] = mk;
        }
        a /= static_cast<double>(K);
        double mu = 0.0;
        for (double mk : member_mean) mu += mk;
        mu /= static_cast<double>(K);
        double b = 0.0;
        for (double mk : member_mean) b += (mk - mu) * (mk - mu);
        b /= static_cast<double>(K);
        const double var = std::max(a + b, variance_floor);
        p.mu.push_back(mu);
        p.var.push_back(var);
        p.precision.push_back(1.0 / var);
        p.var_value_part.push_back(a);
        p.var_model_part.push_back(b);
    }
    return p;
}

LikelihoodParams likelihood_from_moments(std::span<const double> mu, std::span<const double> var) {
    if (mu.size() != var.size() || mu.empty()) throw ShapeError("mean and variance vectors must match");
    LikelihoodParams p;
    for (std::size_t h = 0; h < mu.size(); ++h) {
        const double v = std::max(var[h], variance_floor);
        p.mu.push_back(mu[h]);
        p.var.push_back(v);
        p.precision.push_back(1.0 / v);
        p.var_value_part.push_back(v);
        p.var_model_part.push_back(0.0);
    }
    return p;
}

PosteriorEstimate posterior(const LikelihoodParams& params) {
    if (params.size() == 0) throw EmptyInputError("no horizons to fuse");
    PosteriorEstimate post;
    double total = 0.0;
    for (double r : params.precision) total += r;
    post.var = 1.0 / total;
    post.weights.resize(params.size());
    for (std::size_t h = 0; h < params.size(); ++h) {
        post.weights[h] = params.precision[h] / total;
        post.mean += post.weights[h] * params.mu[h];
        post.expected_horizon += post.weights[h] * static_cast<double>(h);
    }
    return post;
}

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::lcb: return "lcb";
        case EstimatorKind::map: return "map";
        case EstimatorKind::quantile: return "quantile";
        case EstimatorKind::fixed_lambda: return "fixed_lambda";
        case EstimatorKind::fixed_uniform: return "fixed_uniform";
    }
    return "lcb";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
    for (auto k : {EstimatorKind::lcb, EstimatorKind::map, EstimatorKind::quantile, EstimatorKind::fixed_lambda,
                   EstimatorKind::fixed_uniform})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown estimator '" + name + "'");
}

void TargetEstimatorConfig::validate() const {
    if (!(psi >= 0.0)) throw ConfigError("psi must be non-negative");
    if (kind == EstimatorKind::fixed_lambda && !(lambda >= 0.0 && lambda < 1.0))
        throw ConfigError("lambda must lie in [0, 1)");
    if (kind == EstimatorKind::quantile && !(alpha > 0.0 && alpha <= 1.0))
        throw ConfigError("alpha must lie in (0, 1]");
}

std::vector<double> lambda_weights(std::size_t horizon, double lambda) {
    std::vector<double> w(horizon + 1);
    if (lambda == 0.0) {
        w.assign(horizon + 1, 0.0);
        w[0] = 1.0;
        return w;
    }
    const double norm = (1.0 - lambda) / (1.0 - std::pow(lambda, static_cast<double>(horizon + 1)));
    for (std::size_t h = 0; h <= horizon; ++h) w[h] = norm * std::pow(lambda, static_cast<double>(h));
    return w;
}

namespace {

double weighted_lcb(const ReturnGrid& grid, const std::vector<double>& w, double psi) {
    const std::size_t n = grid.particles * grid.heads;
    std::vector<double> sums(n, 0.0);
    for (std::size_t k = 0; k < grid.particles; ++k)
        for (std::size_t m = 0; m < grid.heads; ++m)
            for (std::size_t h = 0; h <= grid.horizon; ++h) sums[k * grid.heads + m] += w[h] * grid.at(h, k, m);
    double mean = 0.0;
    for (double s : sums) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : sums) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n);
    return mean - psi * std::sqrt(var);
}

}  // namespace

double target_estimate(const ReturnGrid& grid, const TargetEstimatorConfig& config) {
    config.validate();
    if (grid.samples.empty()) throw EmptyInputError("return grid has no samples");
    switch (config.kind) {
        case EstimatorKind::lcb:
        case EstimatorKind::map: return target_estimate(posterior(likelihood_params(grid)), config);
        case EstimatorKind::quantile: {
            std::vector<double> pooled = grid.samples;
            std::sort(pooled.begin(), pooled.end());
            const auto n = static_cast<long long>(pooled.size());
            const long long idx = std::clamp(static_cast<long long>(std::floor(config.alpha * static_cast<double>(n))), 1LL, n);
            return pooled[static_cast<std::size_t>(idx - 1)];
        }
        case EstimatorKind::fixed_lambda: return weighted_lcb(grid, lambda_weights(grid.horizon, config.lambda), config.psi);
        case EstimatorKind::fixed_uniform:
            return weighted_lcb(grid, std::vector<double>(grid.horizon + 1, 1.0 / static_cast<double>(grid.horizon + 1)),
                                config.psi);
    }
    return 0.0;
}

double target_estimate(const PosteriorEstimate& post, const TargetEstimatorConfig& config) {
    config.validate();
    if (config.kind == EstimatorKind::map) return post.mean;
    if (config.kind == EstimatorKind::lcb) return post.mean - config.psi * std::sqrt(post.var);
    throw ConfigError("estimator '" + to_string(config.kind) + "' needs the full return grid");
}

std::vector<double> variance_ratio(const LikelihoodParams& params) {
    std::vector<double> r(params.size(), 0.0);
    for (std::size_t h = 0; h < params.size(); ++h) {
        const double total = params.var_value_part[h] + params.var_model_part[h];
        r[h] = total > 0.0 ? params.var_value_part[h] / total : 0.0;
    }
    return r;
}

}  // namespace cbop
