#include "cbop/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbop/errors.hpp"

namespace cbop {

namespace {
constexpr double squash_eps = 1e-6;
constexpr double tanh_limit = 1.0 - 1e-12;
}  // namespace

PolicyNet::PolicyNet(std::size_t obs_dim, std::vector<double> action_low, std::vector<double> action_high,
                     const std::vector<std::size_t>& hidden, Activation activation, double entropy_temperature,
                     Rng& rng, double initial_log_std)
    : low_(std::move(action_low)), high_(std::move(action_high)), temperature_(entropy_temperature) {
    if (low_.size() != high_.size() || low_.empty()) throw ShapeError("action bounds must have equal, positive size");
    for (std::size_t j = 0; j < low_.size(); ++j)
        if (!(low_[j] < high_[j])) throw ConfigError("action box must satisfy low < high");
    std::vector<std::size_t> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2 * low_.size());
    net_ = DenseNet(sizes, activation, Activation::identity, rng);
    const std::size_t last = net_.num_layers() - 1;
    const std::size_t act = low_.size();
    for (std::size_t i = 0; i < sizes[sizes.size() - 2]; ++i)
        for (std::size_t j = 0; j < act; ++j) net_.weight(last, i, act + j) = 0.0;
    for (std::size_t j = 0; j < act; ++j) net_.bias(last, act + j) = initial_log_std;
}

PolicyNet PolicyNet::from_parts(DenseNet net, std::vector<double> low, std::vector<double> high, double temperature) {
    if (net.output_dim() != 2 * low.size()) throw ShapeError("policy network output must be 2 x action dim");
    PolicyNet p;
    p.net_ = std::move(net);
    p.low_ = std::move(low);
    p.high_ = std::move(high);
    p.temperature_ = temperature;
    return p;
}

double PolicyNet::squash(std::size_t j, double u) const {
    const double t = std::clamp(std::tanh(u), -tanh_limit, tanh_limit);
    return center(j) + half_range(j) * t;
}

std::vector<double> PolicyNet::deterministic_action(std::span<const double> obs) const {
    return deterministic_actions(Matrix::from_row(obs)).data();
}

Matrix PolicyNet::deterministic_actions(const Matrix& obs) const {
    const Matrix out = net_.forward(obs);
    Matrix a(obs.rows(), act_dim());
    for (std::size_t r = 0; r < obs.rows(); ++r)
        for (std::size_t j = 0; j < act_dim(); ++j) a(r, j) = squash(j, out(r, j));
    return a;
}

std::vector<double> PolicyNet::sample_action(std::span<const double> obs, Rng& rng) const {
    return sample_actions(Matrix::from_row(obs), rng).data();
}

Matrix PolicyNet::sample_actions(const Matrix& obs, Rng& rng) const {
    const Matrix out = net_.forward(obs);
    Matrix a(obs.rows(), act_dim());
    for (std::size_t r = 0; r < obs.rows(); ++r)
        for (std::size_t j = 0; j < act_dim(); ++j) {
            const double ls = std::clamp(out(r, act_dim() + j), log_std_min, log_std_max);
            a(r, j) = squash(j, out(r, j) + std::exp(ls) * standard_normal(rng));
        }
    return a;
}

PolicyNet::Reparam PolicyNet::sample_reparam(const Matrix& obs, Rng& rng) const {
    Reparam s;
    const Matrix out = net_.forward(obs, s.cache);
    const std::size_t n = obs.rows(), act = act_dim();
    s.noise = Matrix(n, act);
    s.pre_tanh = Matrix(n, act);
    s.actions = Matrix(n, act);
    s.log_std = Matrix(n, act);
    s.log_std_clamped.assign(n * act, 0);
    s.log_prob.assign(n, 0.0);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    for (std::size_t r = 0; r < n; ++r) {
        double lp = 0.0;
        for (std::size_t j = 0; j < act; ++j) {
            const double raw = out(r, act + j);
            const double ls = std::clamp(raw, log_std_min, log_std_max);
            s.log_std_clamped[r * act + j] = (raw < log_std_min || raw > log_std_max) ? 1 : 0;
            const double eps = standard_normal(rng);
            const double u = out(r, j) + std::exp(ls) * eps;
            const double t = std::tanh(u);
            s.noise(r, j) = eps;
            s.pre_tanh(r, j) = u;
            s.log_std(r, j) = ls;
            s.actions(r, j) = squash(j, u);
            lp += -0.5 * eps * eps - ls - half_log_2pi - std::log(half_range(j)) - std::log(1.0 - t * t + squash_eps);
        }
        s.log_prob[r] = lp;
    }
    return s;
}

std::vector<double> PolicyNet::reparam_gradient(const Reparam& sample, const Matrix& d_action,
                                                double alpha_weight) const {
    const std::size_t n = sample.actions.rows(), act = act_dim();
    if (d_action.rows() != n || d_action.cols() != act) throw ShapeError("action gradient shape mismatch", "gradient-shape");
    Matrix upstream(n, 2 * act);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < act; ++j) {
            const double t = std::tanh(sample.pre_tanh(r, j));
            const double one_m = 1.0 - t * t;
            const double d_u = d_action(r, j) * half_range(j) * one_m + alpha_weight * 2.0 * t * one_m / (one_m + squash_eps);
            upstream(r, j) = d_u;
            const double sd = std::exp(sample.log_std(r, j));
            upstream(r, act + j) =
                sample.log_std_clamped[r * act + j] ? 0.0 : d_u * sd * sample.noise(r, j) - alpha_weight;
        }
    }
    return net_.backward(sample.cache, upstream).params;
}

double PolicyNet::bc_loss(const Matrix& obs, const Matrix& actions, std::vector<double>* grad) const {
    if (actions.rows() != obs.rows() || actions.cols() != act_dim()) throw ShapeError("BC batch shape mismatch");
    DenseNet::Cache cache;
    const Matrix out = net_.forward(obs, cache);
    const std::size_t n = obs.rows(), act = act_dim();
    const double scale = 1.0 / static_cast<double>(n * act);
    Matrix upstream(n, 2 * act);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < act; ++j) {
            const double t = std::tanh(out(r, j));
            const double err = center(j) + half_range(j) * t - actions(r, j);
            loss += err * err;
            upstream(r, j) = 2.0 * err * scale * half_range(j) * (1.0 - t * t);
        }
    if (grad) *grad = net_.backward(cache, upstream).params;
    return loss * scale;
}

}  // namespace cbop
