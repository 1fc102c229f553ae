#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cbop/matrix.hpp"
#include "cbop/rng.hpp"

namespace cbop {

enum class Activation { identity, relu, tanh, swish };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/**
 * Fully connected feed-forward network with analytic reverse-mode gradients.
 *
 * Layer l maps layer_sizes[l] -> layer_sizes[l+1] as y = x W + b, followed by
 * the hidden activation (or the output activation on the last layer). All
 * parameters live in one contiguous buffer, laid out per layer as the weight
 * matrix (in x out, row-major) followed by the bias vector. Optimizers,
 * soft updates and checkpoints operate directly on that buffer.
 *
 * Per-row accumulation order is fixed (bias first, then inputs in ascending
 * index), so a batched call reproduces single-row calls bit for bit.
 */
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output, Rng& rng);

    static DenseNet zeros(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output);

    struct Cache {
        std::vector<Matrix> pre;   // pre-activation of each layer
        std::vector<Matrix> post;  // post[0] is the input, post[l+1] the output of layer l
    };

    struct Gradients {
        std::vector<double> params;  // same layout as params()
        Matrix input;
    };

    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    std::size_t num_layers() const { return layer_sizes_.size() - 1; }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    double& weight(std::size_t layer, std::size_t in, std::size_t out);
    double weight(std::size_t layer, std::size_t in, std::size_t out) const;
    double& bias(std::size_t layer, std::size_t out);
    double bias(std::size_t layer, std::size_t out) const;

    Matrix forward(const Matrix& input) const;
    Matrix forward(const Matrix& input, Cache& cache) const;
    std::vector<double> forward(std::span<const double> input) const;

    /// Gradients of sum(upstream .* output) w.r.t. parameters and input.
    Gradients backward(const Cache& cache, const Matrix& upstream) const;

    /// Forward-mode derivative of the output along `tangent` (one tangent per row).
    Matrix jvp(const Matrix& input, const Matrix& tangent) const;

    /// Parameter gradient of sum(upstream .* jvp(input, tangent)), i.e. a
    /// reverse pass through the forward-mode derivative. Used to
    /// differentiate losses defined on input gradients.
    std::vector<double> tangent_backward(const Matrix& input, const Matrix& tangent,
                                         const Matrix& upstream) const;

    bool same_architecture(const DenseNet& other) const;
    bool all_finite() const;

private:
    Activation layer_activation(std::size_t l) const { return l + 1 == num_layers() ? output_ : hidden_; }
    void allocate();
    void check_input(const Matrix& input) const;

    std::vector<std::size_t> layer_sizes_;
    Activation hidden_ = Activation::relu;
    Activation output_ = Activation::identity;
    std::vector<double> params_;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> bias_offset_;
};

}  // namespace cbop
