#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cbop {

struct AdamState {
    AdamState() = default;
    AdamState(std::size_t num_params, double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : first_moment(num_params, 0.0),
          second_moment(num_params, 0.0),
          learning_rate(lr),
          beta1(beta1),
          beta2(beta2),
          epsilon(epsilon) {}

    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam step, in place. Throws NonFiniteError (leaving params
/// and state untouched) if any gradient entry is NaN or infinite.
void adam_update(std::span<double> params, std::span<const double> gradients, AdamState& state);

}  // namespace cbop
