#pragma once

#include <span>
#include <vector>

#include "cbop/dense_net.hpp"
#include "cbop/matrix.hpp"
#include "cbop/rng.hpp"

namespace cbop {

/**
 * Tanh-squashed diagonal Gaussian policy. The network emits per-dimension
 * mean and log-std (clamped to [log_std_min, log_std_max]); actions are
 * center + half_range * tanh(mean + std * noise).
 */
class PolicyNet {
public:
    static constexpr double log_std_min = -5.0;
    static constexpr double log_std_max = 2.0;

    PolicyNet() = default;
    PolicyNet(std::size_t obs_dim, std::vector<double> action_low, std::vector<double> action_high,
              const std::vector<std::size_t>& hidden, Activation activation, double entropy_temperature, Rng& rng,
              double initial_log_std = -1.0);

    std::size_t obs_dim() const { return net_.input_dim(); }
    std::size_t act_dim() const { return low_.size(); }
    const std::vector<double>& action_low() const { return low_; }
    const std::vector<double>& action_high() const { return high_; }
    double entropy_temperature() const { return temperature_; }
    void set_entropy_temperature(double t) { temperature_ = t; }

    DenseNet& net() { return net_; }
    const DenseNet& net() const { return net_; }

    std::vector<double> deterministic_action(std::span<const double> obs) const;
    Matrix deterministic_actions(const Matrix& obs) const;
    std::vector<double> sample_action(std::span<const double> obs, Rng& rng) const;
    /// One noise draw per row, rows in ascending order.
    Matrix sample_actions(const Matrix& obs, Rng& rng) const;

    struct Reparam {
        DenseNet::Cache cache;
        Matrix noise;
        Matrix pre_tanh;
        Matrix actions;
        Matrix log_std;
        std::vector<std::uint8_t> log_std_clamped;  // per element
        std::vector<double> log_prob;
    };

    Reparam sample_reparam(const Matrix& obs, Rng& rng) const;

    /// Parameter gradient of  sum_rows [ d_action . a + alpha_weight * log pi(a|s) ]
    /// through the reparameterized sample. `d_action` is the gradient of the
    /// caller's objective w.r.t. each sampled action; `alpha_weight` scales
    /// the log-probability term (entropy_temperature / batch size for SAC).
    std::vector<double> reparam_gradient(const Reparam& sample, const Matrix& d_action, double alpha_weight) const;

    /// Mean squared error between logged actions and the deterministic head,
    /// averaged over rows and action dims; optionally its parameter gradient.
    double bc_loss(const Matrix& obs, const Matrix& actions, std::vector<double>* grad) const;

    bool same_architecture(const PolicyNet& other) const {
        return net_.same_architecture(other.net_) && low_ == other.low_ && high_ == other.high_;
    }

    static PolicyNet from_parts(DenseNet net, std::vector<double> low, std::vector<double> high, double temperature);

private:
    double center(std::size_t j) const { return 0.5 * (high_[j] + low_[j]); }
    double half_range(std::size_t j) const { return 0.5 * (high_[j] - low_[j]); }
    double squash(std::size_t j, double u) const;

    DenseNet net_;
    std::vector<double> low_, high_;
    double temperature_ = 0.05;
};

}  // namespace cbop
