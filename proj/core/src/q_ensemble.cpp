#include "cbop/q_ensemble.hpp"

#include <cmath>

#include "cbop/errors.hpp"

namespace cbop {

QEnsemble::QEnsemble(std::size_t obs_dim, std::size_t act_dim, std::size_t num_heads,
                     const std::vector<std::size_t>& hidden, Activation activation, double target_update_rate,
                     Rng& rng)
    : obs_dim_(obs_dim), act_dim_(act_dim), rate_(target_update_rate) {
    if (num_heads < 2) throw ConfigError("a Q ensemble needs at least 2 heads");
    if (!(target_update_rate > 0.0 && target_update_rate <= 1.0))
        throw ConfigError("target update rate must lie in (0, 1]");
    std::vector<std::size_t> sizes{obs_dim + act_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    for (std::size_t m = 0; m < num_heads; ++m) online_.emplace_back(sizes, activation, Activation::identity, rng);
    target_ = online_;
}

QEnsemble QEnsemble::from_heads(std::vector<DenseNet> online, std::size_t obs_dim, double target_update_rate) {
    if (online.empty()) throw ConfigError("a Q ensemble needs at least one head");
    QEnsemble q;
    q.obs_dim_ = obs_dim;
    q.act_dim_ = online.front().input_dim() - obs_dim;
    q.rate_ = target_update_rate;
    for (const auto& h : online)
        if (!h.same_architecture(online.front()) || h.output_dim() != 1)
            throw ShapeError("all Q heads must share one scalar-output architecture");
    q.online_ = std::move(online);
    q.target_ = q.online_;
    return q;
}

Matrix QEnsemble::make_input(const Matrix& obs, const Matrix& actions) const {
    if (obs.cols() != obs_dim_ || actions.cols() != act_dim_ || obs.rows() != actions.rows())
        throw ShapeError("Q input dims do not match the ensemble", "input-shape");
    Matrix x(obs.rows(), obs_dim_ + act_dim_);
    for (std::size_t r = 0; r < obs.rows(); ++r) {
        for (std::size_t j = 0; j < obs_dim_; ++j) x(r, j) = obs(r, j);
        for (std::size_t j = 0; j < act_dim_; ++j) x(r, obs_dim_ + j) = actions(r, j);
    }
    return x;
}

std::vector<double> QEnsemble::q_values(QSet which, std::span<const double> obs, std::span<const double> action) const {
    return q_values(which, Matrix::from_row(obs), Matrix::from_row(action)).data();
}

Matrix QEnsemble::q_values(QSet which, const Matrix& obs, const Matrix& actions) const {
    const Matrix x = make_input(obs, actions);
    Matrix out(x.rows(), num_heads());
    for (std::size_t m = 0; m < num_heads(); ++m) {
        const Matrix q = head(which, m).forward(x);
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, m) = q(r, 0);
    }
    return out;
}

void QEnsemble::soft_update() {
    for (std::size_t m = 0; m < num_heads(); ++m) {
        auto t = target_[m].params();
        const auto o = online_[m].params();
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - rate_) * t[i] + rate_ * o[i];
    }
}

void QEnsemble::set_target_update_rate(double rate) {
    if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("target update rate must lie in (0, 1]");
    rate_ = rate;
}

void QEnsemble::sync_targets() { target_ = online_; }

QEnsemble::Diversity QEnsemble::diversity_penalty(const Matrix& obs, const Matrix& actions) const {
    Diversity d;
    const std::size_t heads = num_heads();
    d.grads.assign(heads, std::vector<double>());
    if (heads < 2 || obs.rows() == 0) {
        for (std::size_t m = 0; m < heads; ++m) d.grads[m].assign(online_[m].num_params(), 0.0);
        return d;
    }
    const Matrix x = make_input(obs, actions);
    const std::size_t n = x.rows();
    const Matrix ones(n, 1, 1.0);

    // Per-head action gradients, n x act_dim each.
    std::vector<Matrix> g(heads);
    for (std::size_t m = 0; m < heads; ++m) {
        DenseNet::Cache cache;
        online_[m].forward(x, cache);
        const Matrix in_grad = online_[m].backward(cache, ones).input;
        g[m] = Matrix(n, act_dim_);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < act_dim_; ++j) g[m](r, j) = in_grad(r, obs_dim_ + j);
    }

    const double pairs = static_cast<double>(heads * (heads - 1) / 2);
    const double scale = 1.0 / (static_cast<double>(n) * pairs);
    std::vector<Matrix> tangent(heads, Matrix(n, obs_dim_ + act_dim_));
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> norm(heads);
        for (std::size_t m = 0; m < heads; ++m) {
            double s = 1e-12;
            for (std::size_t j = 0; j < act_dim_; ++j) s += g[m](r, j) * g[m](r, j);
            norm[m] = std::sqrt(s);
        }
        for (std::size_t a = 0; a < heads; ++a)
            for (std::size_t b = a + 1; b < heads; ++b) {
                double dot = 0.0;
                for (std::size_t j = 0; j < act_dim_; ++j) dot += g[a](r, j) * g[b](r, j);
                const double cos = dot / (norm[a] * norm[b]);
                d.penalty += cos * scale;
                for (std::size_t j = 0; j < act_dim_; ++j) {
                    tangent[a](r, obs_dim_ + j) +=
                        scale * (g[b](r, j) / (norm[a] * norm[b]) - cos * g[a](r, j) / (norm[a] * norm[a]));
                    tangent[b](r, obs_dim_ + j) +=
                        scale * (g[a](r, j) / (norm[a] * norm[b]) - cos * g[b](r, j) / (norm[b] * norm[b]));
                }
            }
    }
    for (std::size_t m = 0; m < heads; ++m) d.grads[m] = online_[m].tangent_backward(x, tangent[m], ones);
    return d;
}

}  // namespace cbop
