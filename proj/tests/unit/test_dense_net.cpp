#include <gtest/gtest.h>

#include "cbop/dense_net.hpp"
#include "cbop/errors.hpp"
#include "oracles.hpp"

using namespace cbop;
using cbop::testkit::central_difference;
using cbop::testkit::max_relative_error;

namespace cbop {
void PrintTo(Activation a, std::ostream* os) { *os << to_string(a); }
}  // namespace cbop

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = uniform(rng, -1.0, 1.0);
    return m;
}

double weighted_sum(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

}  // namespace

TEST(DenseNet, ZeroNetGivesZeroOutput) {
    const DenseNet net = DenseNet::zeros({3, 8, 2}, Activation::tanh, Activation::identity);
    const auto y = net.forward(std::vector<double>{0.3, -1.0, 7.0});
    EXPECT_EQ(y, (std::vector<double>{0.0, 0.0}));
}

TEST(DenseNet, AffineScalarNet) {
    DenseNet net = DenseNet::zeros({1, 1}, Activation::identity, Activation::identity);
    net.weight(0, 0, 0) = 2.0;
    net.bias(0, 0) = 1.0;
    EXPECT_EQ(net.forward(std::vector<double>{3.0}), std::vector<double>{7.0});
}

TEST(DenseNet, BatchRowsEqualSingleCalls) {
    Rng rng = make_rng(11);
    const DenseNet net({5, 16, 3}, Activation::relu, Activation::identity, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix y = net.forward(x);
    for (std::size_t r = 0; r < 4; ++r) {
        const auto single = net.forward(x.row(r));
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y(r, j), single[j]);
    }
}

TEST(DenseNet, InputDimensionMismatchThrows) {
    Rng rng = make_rng(1);
    const DenseNet net({3, 4, 1}, Activation::relu, Activation::identity, rng);
    try {
        net.forward(Matrix(2, 4));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_EQ(e.tag(), "input-shape");
    }
}

TEST(DenseNet, UpstreamShapeMismatchThrows) {
    Rng rng = make_rng(1);
    const DenseNet net({3, 4, 2}, Activation::relu, Activation::identity, rng);
    DenseNet::Cache cache;
    net.forward(Matrix(2, 3), cache);
    try {
        net.backward(cache, Matrix(2, 1));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_EQ(e.tag(), "gradient-shape");
    }
}

TEST(DenseNet, ZeroUpstreamGivesZeroGradients) {
    Rng rng = make_rng(2);
    const DenseNet net({3, 6, 2}, Activation::tanh, Activation::identity, rng);
    const Matrix x = random_matrix(5, 3, rng);
    DenseNet::Cache cache;
    net.forward(x, cache);
    const auto g = net.backward(cache, Matrix(5, 2));
    for (double v : g.params) EXPECT_EQ(v, 0.0);
    for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, ScalarAffineHandChainRule) {
    DenseNet net = DenseNet::zeros({1, 1}, Activation::identity, Activation::identity);
    net.weight(0, 0, 0) = 2.0;
    net.bias(0, 0) = 1.0;
    DenseNet::Cache cache;
    net.forward(Matrix(1, 1, 3.0), cache);
    const auto g = net.backward(cache, Matrix(1, 1, 1.0));
    ASSERT_EQ(g.params.size(), 2u);
    EXPECT_DOUBLE_EQ(g.params[0], 3.0);  // d/dw
    EXPECT_DOUBLE_EQ(g.params[1], 1.0);  // d/db
    EXPECT_DOUBLE_EQ(g.input(0, 0), 2.0);
}

class DenseNetFiniteDifference : public ::testing::TestWithParam<Activation> {};

TEST_P(DenseNetFiniteDifference, ParameterAndInputGradients) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng = make_rng(seed, {17});
        DenseNet net({3, 7, 5, 2}, GetParam(), Activation::tanh, rng);
        const Matrix x = random_matrix(4, 3, rng);
        const Matrix up = random_matrix(4, 2, rng);
        DenseNet::Cache cache;
        net.forward(x, cache);
        const auto g = net.backward(cache, up);
        const auto fd = central_difference(net.params(), [&] { return weighted_sum(net.forward(x), up); }, 1e-5);
        EXPECT_LT(max_relative_error(g.params, fd, 1e-6), 1e-4) << "seed " << seed;

        Matrix xv = x;
        const auto fd_in =
            central_difference(xv.data(), [&] { return weighted_sum(net.forward(xv), up); }, 1e-5);
        EXPECT_LT(max_relative_error(g.input.data(), fd_in, 1e-6), 1e-4) << "seed " << seed;
    }
}

TEST_P(DenseNetFiniteDifference, JvpAndTangentBackward) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng = make_rng(seed, {23});
        DenseNet net({4, 6, 6, 1}, GetParam(), Activation::identity, rng);
        const Matrix x = random_matrix(3, 4, rng);
        const Matrix t = random_matrix(3, 4, rng);
        const Matrix up = random_matrix(3, 1, rng);

        // jvp against a finite difference of the forward pass along t.
        const double h = 1e-6;
        Matrix xp = x, xm = x;
        for (std::size_t i = 0; i < x.data().size(); ++i) {
            xp.data()[i] += h * t.data()[i];
            xm.data()[i] -= h * t.data()[i];
        }
        const Matrix yp = net.forward(xp), ym = net.forward(xm), j = net.jvp(x, t);
        for (std::size_t r = 0; r < 3; ++r)
            EXPECT_NEAR(j(r, 0), (yp(r, 0) - ym(r, 0)) / (2 * h), 1e-6 * std::max(1.0, std::abs(j(r, 0))));

        const auto g = net.tangent_backward(x, t, up);
        const auto fd = central_difference(net.params(), [&] { return weighted_sum(net.jvp(x, t), up); }, 1e-5);
        EXPECT_LT(max_relative_error(g, fd, 1e-6), 1e-4) << "seed " << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(SmoothActivations, DenseNetFiniteDifference,
                         ::testing::Values(Activation::tanh, Activation::swish),
                         [](const auto& info) { return to_string(info.param); });

TEST(DenseNet, SameSeedSameParameters) {
    Rng a = make_rng(5), b = make_rng(5);
    const DenseNet x({3, 4, 1}, Activation::relu, Activation::identity, a);
    const DenseNet y({3, 4, 1}, Activation::relu, Activation::identity, b);
    EXPECT_TRUE(std::equal(x.params().begin(), x.params().end(), y.params().begin()));
}
