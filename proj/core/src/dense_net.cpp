#include "cbop/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbop/errors.hpp"

namespace cbop {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::swish: return z * sigmoid(z);
    }
    return z;
}

// First derivative given pre-activation z and output y = activate(z).
double derivative(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::swish: {
            const double s = sigmoid(z);
            return s * (1.0 + z * (1.0 - s));
        }
    }
    return 1.0;
}

double second_derivative(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity:
        case Activation::relu: return 0.0;
        case Activation::tanh: return -2.0 * y * (1.0 - y * y);
        case Activation::swish: {
            const double s = sigmoid(z);
            return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
        }
    }
    return 0.0;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::swish: return "swish";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "swish") return Activation::swish;
    throw ConfigError("unknown activation '" + name + "'");
}

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output, Rng& rng)
    : layer_sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
    allocate();
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t n_w = layer_sizes_[l] * layer_sizes_[l + 1];
        for (std::size_t i = 0; i < n_w; ++i) params_[weight_offset_[l] + i] = u(rng);
        for (std::size_t j = 0; j < layer_sizes_[l + 1]; ++j) params_[bias_offset_[l] + j] = u(rng);
    }
}

DenseNet DenseNet::zeros(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output) {
    DenseNet net;
    net.layer_sizes_ = std::move(layer_sizes);
    net.hidden_ = hidden;
    net.output_ = output;
    net.allocate();
    return net;
}

void DenseNet::allocate() {
    if (layer_sizes_.size() < 2) throw ShapeError("a network needs at least an input and an output layer");
    std::size_t offset = 0;
    weight_offset_.clear();
    bias_offset_.clear();
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        if (layer_sizes_[l] == 0 || layer_sizes_[l + 1] == 0) throw ShapeError("layer sizes must be positive");
        weight_offset_.push_back(offset);
        offset += layer_sizes_[l] * layer_sizes_[l + 1];
        bias_offset_.push_back(offset);
        offset += layer_sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
}

double& DenseNet::weight(std::size_t layer, std::size_t in, std::size_t out) {
    return params_[weight_offset_[layer] + in * layer_sizes_[layer + 1] + out];
}
double DenseNet::weight(std::size_t layer, std::size_t in, std::size_t out) const {
    return params_[weight_offset_[layer] + in * layer_sizes_[layer + 1] + out];
}
double& DenseNet::bias(std::size_t layer, std::size_t out) { return params_[bias_offset_[layer] + out]; }
double DenseNet::bias(std::size_t layer, std::size_t out) const { return params_[bias_offset_[layer] + out]; }

void DenseNet::check_input(const Matrix& input) const {
    if (input.cols() != input_dim()) {
        std::ostringstream os;
        os << "network expects input width " << input_dim() << ", got " << input.cols();
        throw ShapeError(os.str(), "input-shape");
    }
}

Matrix DenseNet::forward(const Matrix& input) const {
    check_input(input);
    Matrix x = input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + weight_offset_[l];
        const double* b = params_.data() + bias_offset_[l];
        const Activation act = layer_activation(l);
        Matrix y(x.rows(), n_out);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double* out = y.row(r).data();
            const double* in = x.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) out[j] = b[j];
            for (std::size_t i = 0; i < n_in; ++i) {
                const double xi = in[i];
                const double* wi = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * wi[j];
            }
            if (act != Activation::identity)
                for (std::size_t j = 0; j < n_out; ++j) out[j] = activate(act, out[j]);
        }
        x = std::move(y);
    }
    return x;
}

Matrix DenseNet::forward(const Matrix& input, Cache& cache) const {
    check_input(input);
    cache.pre.assign(num_layers(), Matrix{});
    cache.post.assign(num_layers() + 1, Matrix{});
    cache.post[0] = input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + weight_offset_[l];
        const double* b = params_.data() + bias_offset_[l];
        const Activation act = layer_activation(l);
        const Matrix& x = cache.post[l];
        Matrix z(x.rows(), n_out);
        Matrix y(x.rows(), n_out);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double* zr = z.row(r).data();
            const double* in = x.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) zr[j] = b[j];
            for (std::size_t i = 0; i < n_in; ++i) {
                const double xi = in[i];
                const double* wi = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) zr[j] += xi * wi[j];
            }
            double* yr = y.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) yr[j] = activate(act, zr[j]);
        }
        cache.pre[l] = std::move(z);
        cache.post[l + 1] = std::move(y);
    }
    return cache.post.back();
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
    return forward(Matrix::from_row(input)).data();
}

namespace {

constexpr std::size_t outer_block = 8;

/// Transposed copy of the n_in x n_out weight block.
std::vector<double> transpose_weights(const double* w, std::size_t n_in, std::size_t n_out) {
    std::vector<double> wt(n_in * n_out);
    for (std::size_t i = 0; i < n_in; ++i)
        for (std::size_t j = 0; j < n_out; ++j) wt[j * n_in + i] = w[i * n_out + j];
    return wt;
}

/// out(r, i) = sum_j w(i, j) * d(r, j), summed in ascending j.
Matrix times_transposed(const std::vector<double>& wt, const Matrix& d, std::size_t n_in) {
    Matrix out(d.rows(), n_in);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const double* dr = d.row(r).data();
        double* o = out.row(r).data();
        for (std::size_t j = 0; j < d.cols(); ++j) {
            const double dj = dr[j];
            const double* wj = wt.data() + j * n_in;
            for (std::size_t i = 0; i < n_in; ++i) o[i] += wj[i] * dj;
        }
    }
    return out;
}

}  // namespace

DenseNet::Gradients DenseNet::backward(const Cache& cache, const Matrix& upstream) const {
    const Matrix& out = cache.post.back();
    if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
        std::ostringstream os;
        os << "upstream gradient is " << upstream.rows() << "x" << upstream.cols() << ", output is "
           << out.rows() << "x" << out.cols();
        throw ShapeError(os.str(), "gradient-shape");
    }
    Gradients g;
    g.params.assign(params_.size(), 0.0);
    Matrix delta = upstream;  // gradient w.r.t. post-activation of the current layer
    for (std::size_t l = num_layers(); l-- > 0;) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const Activation act = layer_activation(l);
        const Matrix& z = cache.pre[l];
        const Matrix& y = cache.post[l + 1];
        const Matrix& x = cache.post[l];
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            double* d = delta.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) d[j] *= derivative(act, z(r, j), y(r, j));
        }
        double* gw = g.params.data() + weight_offset_[l];
        double* gb = g.params.data() + bias_offset_[l];
        // Rows stay the outer summation index per element; blocking only affects locality.
        for (std::size_t i0 = 0; i0 < n_in; i0 += outer_block) {
            const std::size_t i1 = std::min(n_in, i0 + outer_block);
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const double* d = delta.row(r).data();
                const double* in = x.row(r).data();
                for (std::size_t i = i0; i < i1; ++i) {
                    const double xi = in[i];
                    double* gwi = gw + i * n_out;
                    for (std::size_t j = 0; j < n_out; ++j) gwi[j] += xi * d[j];
                }
            }
        }
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* d = delta.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) gb[j] += d[j];
        }
        Matrix prev = times_transposed(transpose_weights(params_.data() + weight_offset_[l], n_in, n_out), delta, n_in);
        delta = std::move(prev);
    }
    g.input = std::move(delta);
    return g;
}

Matrix DenseNet::jvp(const Matrix& input, const Matrix& tangent) const {
    check_input(input);
    if (tangent.rows() != input.rows() || tangent.cols() != input.cols())
        throw ShapeError("tangent must match the input shape", "input-shape");
    Cache cache;
    forward(input, cache);
    Matrix dot = tangent;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + weight_offset_[l];
        const Activation act = layer_activation(l);
        Matrix next(dot.rows(), n_out);
        for (std::size_t r = 0; r < dot.rows(); ++r) {
            double* o = next.row(r).data();
            const double* in = dot.row(r).data();
            for (std::size_t i = 0; i < n_in; ++i) {
                const double* wi = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) o[j] += in[i] * wi[j];
            }
            for (std::size_t j = 0; j < n_out; ++j)
                o[j] *= derivative(act, cache.pre[l](r, j), cache.post[l + 1](r, j));
        }
        dot = std::move(next);
    }
    return dot;
}

std::vector<double> DenseNet::tangent_backward(const Matrix& input, const Matrix& tangent,
                                               const Matrix& upstream) const {
    check_input(input);
    if (tangent.rows() != input.rows() || tangent.cols() != input.cols())
        throw ShapeError("tangent must match the input shape", "input-shape");
    if (upstream.rows() != input.rows() || upstream.cols() != output_dim())
        throw ShapeError("upstream must match the output shape", "gradient-shape");

    // Forward pass carrying primal values and their tangents.
    Cache cache;
    forward(input, cache);
    std::vector<Matrix> zdot(num_layers());
    std::vector<Matrix> hdot(num_layers() + 1);
    hdot[0] = tangent;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const double* w = params_.data() + weight_offset_[l];
        const Activation act = layer_activation(l);
        Matrix zd(input.rows(), n_out);
        Matrix hd(input.rows(), n_out);
        for (std::size_t r = 0; r < input.rows(); ++r) {
            double* o = zd.row(r).data();
            const double* in = hdot[l].row(r).data();
            for (std::size_t i = 0; i < n_in; ++i) {
                const double* wi = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) o[j] += in[i] * wi[j];
            }
            for (std::size_t j = 0; j < n_out; ++j)
                hd(r, j) = o[j] * derivative(act, cache.pre[l](r, j), cache.post[l + 1](r, j));
        }
        zdot[l] = std::move(zd);
        hdot[l + 1] = std::move(hd);
    }

    // Reverse pass. adj_h / adj_hd are adjoints of the layer output and its tangent.
    std::vector<double> grad(params_.size(), 0.0);
    Matrix adj_h(input.rows(), output_dim());
    Matrix adj_hd = upstream;
    for (std::size_t l = num_layers(); l-- > 0;) {
        const std::size_t n_in = layer_sizes_[l], n_out = layer_sizes_[l + 1];
        const Activation act = layer_activation(l);
        Matrix adj_z(input.rows(), n_out);
        Matrix adj_zd(input.rows(), n_out);
        for (std::size_t r = 0; r < input.rows(); ++r) {
            for (std::size_t j = 0; j < n_out; ++j) {
                const double z = cache.pre[l](r, j), y = cache.post[l + 1](r, j);
                const double d1 = derivative(act, z, y);
                adj_zd(r, j) = adj_hd(r, j) * d1;
                adj_z(r, j) = adj_h(r, j) * d1 + adj_hd(r, j) * second_derivative(act, z, y) * zdot[l](r, j);
            }
        }
        double* gw = grad.data() + weight_offset_[l];
        double* gb = grad.data() + bias_offset_[l];
        const Matrix& x = cache.post[l];
        const Matrix& xd = hdot[l];
        for (std::size_t i0 = 0; i0 < n_in; i0 += outer_block) {
            const std::size_t i1 = std::min(n_in, i0 + outer_block);
            for (std::size_t r = 0; r < input.rows(); ++r) {
                const double* az = adj_z.row(r).data();
                const double* azd = adj_zd.row(r).data();
                for (std::size_t i = i0; i < i1; ++i) {
                    const double xi = x(r, i), xdi = xd(r, i);
                    double* gwi = gw + i * n_out;
                    for (std::size_t j = 0; j < n_out; ++j) gwi[j] += xi * az[j] + xdi * azd[j];
                }
            }
        }
        for (std::size_t r = 0; r < input.rows(); ++r)
            for (std::size_t j = 0; j < n_out; ++j) gb[j] += adj_z(r, j);
        if (l == 0) break;
        const auto wt = transpose_weights(params_.data() + weight_offset_[l], n_in, n_out);
        adj_h = times_transposed(wt, adj_z, n_in);
        adj_hd = times_transposed(wt, adj_zd, n_in);
    }
    return grad;
}

bool DenseNet::same_architecture(const DenseNet& other) const {
    return layer_sizes_ == other.layer_sizes_ && hidden_ == other.hidden_ && output_ == other.output_;
}

bool DenseNet::all_finite() const {
    for (double p : params_)
        if (!std::isfinite(p)) return false;
    return true;
}

}  // namespace cbop
