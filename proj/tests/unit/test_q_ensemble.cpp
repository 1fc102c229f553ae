#include <gtest/gtest.h>

#include <cmath>

#include "cbop/errors.hpp"
#include "cbop/q_ensemble.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cbop;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = uniform(rng, -1.0, 1.0);
    return m;
}

// Q(s, a) = w0 a0 + w1 a1 on a 1-d state and 2-d action.
DenseNet action_linear_head(double w0, double w1) {
    DenseNet net = DenseNet::zeros({3, 1}, Activation::identity, Activation::identity);
    net.weight(0, 1, 0) = w0;
    net.weight(0, 2, 0) = w1;
    return net;
}

}  // namespace

TEST(QEnsemble, ZeroHeadsGiveZeroValues) {
    std::vector<DenseNet> heads(3, DenseNet::zeros({3, 8, 1}, Activation::relu, Activation::identity));
    const auto q = QEnsemble::from_heads(heads, 2, 0.005);
    EXPECT_EQ(q.q_values(QSet::online, std::vector<double>{1.0, 2.0}, std::vector<double>{3.0}),
              (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(QEnsemble, EachColumnIsItsHead) {
    Rng rng = make_rng(4);
    const QEnsemble q(3, 2, 3, {16, 16}, Activation::relu, 0.005, rng);
    const Matrix obs = random_matrix(5, 3, rng), act = random_matrix(5, 2, rng);
    const Matrix values = q.q_values(QSet::online, obs, act);
    for (std::size_t r = 0; r < 5; ++r) {
        std::vector<double> x(obs.row(r).begin(), obs.row(r).end());
        x.insert(x.end(), act.row(r).begin(), act.row(r).end());
        for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(values(r, m), q.head(QSet::online, m).forward(x)[0]);
        EXPECT_EQ(q.q_values(QSet::online, obs.row(r), act.row(r)), std::vector<double>(values.row(r).begin(), values.row(r).end()));
    }
}

TEST(QEnsemble, InputDimensionMismatchThrows) {
    Rng rng = make_rng(4);
    const QEnsemble q(3, 2, 2, {8}, Activation::relu, 0.005, rng);
    EXPECT_THROW(q.q_values(QSet::online, std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0}), ShapeError);
}

TEST(QEnsemble, RateOneCopiesOnline) {
    Rng rng = make_rng(6);
    QEnsemble q(2, 1, 2, {8}, Activation::tanh, 1.0, rng);
    for (auto& p : q.head(QSet::online, 1).params()) p += 0.5;
    q.soft_update();
    for (std::size_t m = 0; m < 2; ++m) {
        const auto o = q.head(QSet::online, m).params(), t = q.head(QSet::target, m).params();
        EXPECT_TRUE(std::equal(o.begin(), o.end(), t.begin()));
    }
}

TEST(QEnsemble, SoftUpdateScalarMixAndRecurrence) {
    const double rho = 0.005;
    auto q = QEnsemble::from_heads({DenseNet::zeros({1, 1}, Activation::identity, Activation::identity)}, 0, rho);
    q.head(QSet::online, 0).bias(0, 0) = 1.0;
    q.soft_update();
    EXPECT_DOUBLE_EQ(q.head(QSet::target, 0).bias(0, 0), 0.005);
    q.soft_update();
    EXPECT_NEAR(q.head(QSet::target, 0).bias(0, 0), 1.0 - (1.0 - rho) * (1.0 - rho), 1e-15);
}

TEST(QEnsemble, DiversitySingleHeadIsZero) {
    const auto q = QEnsemble::from_heads({action_linear_head(1.0, 2.0)}, 1, 0.005);
    const auto d = q.diversity_penalty(Matrix(4, 1, 0.3), Matrix(4, 2, 0.1));
    EXPECT_EQ(d.penalty, 0.0);
    for (double g : d.grads[0]) EXPECT_EQ(g, 0.0);
}

TEST(QEnsemble, DiversityIdenticalHeadsIsMaximal) {
    Rng rng = make_rng(8);
    const DenseNet head({3, 8, 1}, Activation::tanh, Activation::identity, rng);
    const auto q = QEnsemble::from_heads({head, head, head}, 1, 0.005);
    const auto d = q.diversity_penalty(random_matrix(6, 1, rng), random_matrix(6, 2, rng));
    EXPECT_NEAR(d.penalty, 1.0, 1e-9);
}

TEST(QEnsemble, DiversityOrthogonalGradientsIsZero) {
    const auto q = QEnsemble::from_heads({action_linear_head(1.0, 0.0), action_linear_head(0.0, 1.0)}, 1, 0.005);
    Rng rng = make_rng(9);
    const auto d = q.diversity_penalty(random_matrix(5, 1, rng), random_matrix(5, 2, rng));
    EXPECT_NEAR(d.penalty, 0.0, 1e-15);
}

TEST(QEnsemble, DiversityGradientMatchesFiniteDifference) {
    Rng rng = make_rng(10);
    QEnsemble q(2, 2, 3, {6, 6}, Activation::tanh, 0.005, rng);
    const Matrix obs = random_matrix(4, 2, rng), act = random_matrix(4, 2, rng);
    const auto d = q.diversity_penalty(obs, act);
    for (std::size_t m = 0; m < 3; ++m) {
        const auto fd = testkit::central_difference(q.head(QSet::online, m).params(),
                                                    [&] { return q.diversity_penalty(obs, act).penalty; }, 1e-5);
        EXPECT_LT(testkit::max_relative_error(d.grads[m], fd, 1e-6), 1e-4) << "head " << m;
    }
}
