#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cbop/adam.hpp"
#include "cbop/errors.hpp"

using namespace cbop;

TEST(Adam, ZeroGradientLeavesParamsButCountsStep) {
    std::vector<double> p{1.0, -2.0, 3.0};
    AdamState s(3, 0.1);
    adam_update(p, std::vector<double>(3, 0.0), s);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(s.step_count, 1u);
}

TEST(Adam, ZeroLearningRateLeavesParams) {
    std::vector<double> p{0.5, 0.25};
    AdamState s(2, 0.0);
    for (int i = 0; i < 5; ++i) adam_update(p, std::vector<double>{1.0, -3.0}, s);
    EXPECT_EQ(p, (std::vector<double>{0.5, 0.25}));
}

TEST(Adam, ScalarRecurrenceTwoSteps) {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> p{0.7};
    AdamState s(1, lr, b1, b2, eps);
    double x = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        adam_update(p, std::vector<double>{1.0}, s);
        m = b1 * m + (1 - b1) * 1.0;
        v = b2 * v + (1 - b2) * 1.0;
        const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
        x -= lr * mh / (std::sqrt(vh) + eps);
        EXPECT_NEAR(p[0], x, 1e-15) << "step " << t;
    }
    EXPECT_EQ(s.step_count, 2u);
}

TEST(Adam, NonFiniteGradientRejected) {
    std::vector<double> p{1.0, 2.0};
    AdamState s(2, 0.1);
    EXPECT_THROW(adam_update(p, std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}, s),
                 NonFiniteError);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(s.step_count, 0u);
    EXPECT_THROW(adam_update(p, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}, s),
                 NonFiniteError);
}
