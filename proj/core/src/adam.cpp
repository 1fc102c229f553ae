#include "cbop/adam.hpp"

#include <cmath>
#include <string>

#include "cbop/errors.hpp"

namespace cbop {

void adam_update(std::span<double> params, std::span<const double> gradients, AdamState& state) {
    if (params.size() != gradients.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size())
        throw ShapeError("adam: parameter, gradient and moment sizes differ", "gradient-shape");
    for (std::size_t i = 0; i < gradients.size(); ++i)
        if (!std::isfinite(gradients[i]))
            throw NonFiniteError("adam: non-finite gradient at parameter " + std::to_string(i));

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = gradients[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        params[i] -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
    }
}

}  // namespace cbop
