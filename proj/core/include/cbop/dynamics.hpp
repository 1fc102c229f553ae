#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbop/dataset.hpp"
#include "cbop/dense_net.hpp"
#include "cbop/rng.hpp"

namespace cbop {

enum class PredictMode { mean, sample };

struct DynamicsConfig {
    std::size_t num_members = 30;
    std::size_t num_elites = 20;
    std::vector<std::size_t> hidden = {200, 200, 200, 200};
    Activation activation = Activation::swish;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;  // epochs without validation improvement before a member stops
    double learning_rate = 1e-3;
    double validation_fraction = 0.1;
    bool full_bootstrap = false;  // resample the training split per member instead of per-batch streams
    double logvar_min = -10.0;
    double logvar_max = 0.5;
    std::uint64_t seed = 0;
};

struct DynamicsTrainReport {
    std::vector<double> validation_nll;                 // per member, at its best epoch
    std::vector<std::vector<double>> train_nll_history;  // per member, mean NLL of each epoch
    std::vector<std::size_t> epochs_run;
};

/**
 * Bootstrapped probabilistic ensemble. Each member maps a normalized
 * (state, action) to a diagonal Gaussian over the normalized (delta state,
 * reward). Log-variances are softly bounded to [logvar_min, logvar_max].
 */
class DynamicsEnsemble {
public:
    struct Prediction {
        std::vector<double> next_obs;
        double reward = 0.0;
    };

    struct Head {
        std::vector<double> mean;    // normalized (delta, reward)
        std::vector<double> logvar;  // bounded log-variance
    };

    DynamicsEnsemble() = default;
    DynamicsEnsemble(std::size_t obs_dim, std::size_t act_dim, const NormStats& stats, double logvar_min,
                     double logvar_max);

    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t act_dim() const { return act_dim_; }
    std::size_t input_dim() const { return obs_dim_ + act_dim_; }
    std::size_t target_dim() const { return obs_dim_ + 1; }
    std::size_t num_members() const { return members_.size(); }
    std::size_t num_elites() const { return elite_indices_.size(); }

    const std::vector<DenseNet>& members() const { return members_; }
    std::vector<DenseNet>& members() { return members_; }
    const std::vector<std::size_t>& elite_indices() const { return elite_indices_; }
    void set_elites(std::vector<std::size_t> elites);
    bool is_elite(std::size_t member) const;

    double logvar_min() const { return logvar_min_; }
    double logvar_max() const { return logvar_max_; }
    const std::vector<double>& input_mean() const { return in_mean_; }
    const std::vector<double>& input_std() const { return in_std_; }
    const std::vector<double>& target_mean() const { return out_mean_; }
    const std::vector<double>& target_std() const { return out_std_; }

    std::vector<double> normalize_input(std::span<const double> obs, std::span<const double> action) const;
    std::vector<double> normalize_target(std::span<const double> delta, double reward) const;
    std::vector<double> denormalize_target(std::span<const double> normalized) const;

    /// Head outputs of any member (elite or not) for one input.
    Head head(std::size_t member, std::span<const double> obs, std::span<const double> action) const;

    /// Predicted successor of an elite member. `mean` is deterministic;
    /// `sample` draws from the member's Gaussian using `rng`.
    Prediction predict(std::size_t member, std::span<const double> obs, std::span<const double> action,
                       PredictMode mode, Rng& rng) const;
    Prediction predict(std::size_t member, std::span<const double> obs, std::span<const double> action,
                       PredictMode mode, std::uint64_t seed) const;

    /// Mean Gaussian NLL (per target dimension) of one member on dataset rows.
    double nll(std::size_t member, const Dataset& data, std::span<const std::size_t> rows) const;

    void add_member(DenseNet net);

private:
    std::size_t obs_dim_ = 0;
    std::size_t act_dim_ = 0;
    std::vector<DenseNet> members_;
    std::vector<std::size_t> elite_indices_;
    std::vector<double> in_mean_, in_std_, out_mean_, out_std_;
    double logvar_min_ = -10.0;
    double logvar_max_ = 0.5;
};

inline constexpr double min_norm_std = 1e-8;

/// Soft-bounded log-variance and its derivative w.r.t. the raw head output.
double bound_logvar(double raw, double lo, double hi, double* dlv_draw = nullptr);

/// Trains every member on independent mini-batch streams and keeps the
/// `num_elites` members with the lowest validation NLL.
DynamicsEnsemble train_dynamics(const Dataset& data, const DynamicsConfig& config,
                                DynamicsTrainReport* report = nullptr);

/// Trains one member exactly as train_dynamics would for that index.
DenseNet train_dynamics_member(const Dataset& data, const DynamicsConfig& config, std::size_t member,
                               const DynamicsEnsemble& normalizer, std::span<const std::size_t> train_rows,
                               std::span<const std::size_t> validation_rows, double* validation_nll = nullptr,
                               std::vector<double>* train_history = nullptr, std::size_t* epochs_run = nullptr);

/// Seeded train / validation split used by train_dynamics.
void split_rows(std::size_t n, double validation_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                std::vector<std::size_t>& validation);

}  // namespace cbop
