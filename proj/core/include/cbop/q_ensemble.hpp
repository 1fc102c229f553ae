#pragma once

#include <span>
#include <vector>

#include "cbop/dense_net.hpp"
#include "cbop/matrix.hpp"
#include "cbop/rng.hpp"

namespace cbop {

enum class QSet { online, target };

/// M critic heads over concat(state, action) with slowly tracking target copies.
class QEnsemble {
public:
    QEnsemble() = default;
    QEnsemble(std::size_t obs_dim, std::size_t act_dim, std::size_t num_heads, const std::vector<std::size_t>& hidden,
              Activation activation, double target_update_rate, Rng& rng);

    /// Build from explicit online heads; targets start as exact copies.
    static QEnsemble from_heads(std::vector<DenseNet> online, std::size_t obs_dim, double target_update_rate);

    std::size_t num_heads() const { return online_.size(); }
    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t act_dim() const { return act_dim_; }
    double target_update_rate() const { return rate_; }
    void set_target_update_rate(double rate);

    DenseNet& head(QSet which, std::size_t m) { return which == QSet::online ? online_[m] : target_[m]; }
    const DenseNet& head(QSet which, std::size_t m) const { return which == QSet::online ? online_[m] : target_[m]; }

    std::vector<double> q_values(QSet which, std::span<const double> obs, std::span<const double> action) const;
    /// rows x M matrix of head outputs.
    Matrix q_values(QSet which, const Matrix& obs, const Matrix& actions) const;

    Matrix make_input(const Matrix& obs, const Matrix& actions) const;

    /// target <- (1 - rate) * target + rate * online
    void soft_update();
    void sync_targets();

    struct Diversity {
        double penalty = 0.0;                    // mean pairwise cosine similarity of dQ/da
        std::vector<std::vector<double>> grads;  // per-head parameter gradient of `penalty`
    };

    /// Mean over the batch and over head pairs of the cosine similarity of
    /// the per-head action gradients. Zero for a single head.
    Diversity diversity_penalty(const Matrix& obs, const Matrix& actions) const;

private:
    std::size_t obs_dim_ = 0;
    std::size_t act_dim_ = 0;
    double rate_ = 5e-3;
    std::vector<DenseNet> online_;
    std::vector<DenseNet> target_;
};

}  // namespace cbop
