#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cbop/binary_io.hpp"
#include "cbop/dataset.hpp"
#include "cbop/env.hpp"
#include "cbop/errors.hpp"
#include "fixtures.hpp"

using namespace cbop;

TEST(Environment, PointMassHandArithmetic) {
    const PointMass2D env;
    const auto r = env.step(std::vector<double>{1.0, 0.0, 0.0, 0.0}, std::vector<double>{0.0, 0.0});
    EXPECT_DOUBLE_EQ(r.reward, -1.0);
    EXPECT_EQ(r.next_obs, (std::vector<double>{1.0, 0.0, 0.0, 0.0}));

    const auto m = env.step(std::vector<double>{0.5, -0.5, 0.2, 0.0}, std::vector<double>{0.2, -0.1});
    const double vx = 0.2 + 0.05 * 0.2, vy = 0.0 - 0.05 * 0.1;
    EXPECT_DOUBLE_EQ(m.next_obs[0], 0.5 + 0.05 * vx);
    EXPECT_DOUBLE_EQ(m.next_obs[1], -0.5 + 0.05 * vy);
    EXPECT_DOUBLE_EQ(m.next_obs[2], vx);
    EXPECT_DOUBLE_EQ(m.next_obs[3], vy);
    EXPECT_DOUBLE_EQ(m.reward, -(0.25 + 0.25) - 0.01 * (0.04 + 0.01));
    EXPECT_FALSE(m.terminated);
}

TEST(Environment, PointMassOriginIsFixedPoint) {
    const PointMass2D env;
    const auto r = env.step(std::vector<double>{0, 0, 0, 0}, std::vector<double>{0, 0});
    EXPECT_EQ(r.next_obs, (std::vector<double>{0, 0, 0, 0}));
    EXPECT_EQ(r.reward, 0.0);
}

TEST(Environment, ActionsAreClampedToBox) {
    const PointMass2D env;
    const auto a = env.step(std::vector<double>{0, 0, 0, 0}, std::vector<double>{5.0, -5.0});
    const auto b = env.step(std::vector<double>{0, 0, 0, 0}, std::vector<double>{0.3, -0.3});
    EXPECT_EQ(a.next_obs, b.next_obs);
    EXPECT_EQ(a.reward, b.reward);
}

TEST(Environment, PendulumUprightEquilibrium) {
    const PendulumSwing env;
    std::vector<double> s{1.0, 0.0, 0.0};
    for (int t = 0; t < 50; ++t) {
        const auto r = env.step(s, std::vector<double>{0.0});
        EXPECT_EQ(r.reward, 0.0);  // maximal per-step reward
        s = r.next_obs;
    }
    EXPECT_EQ(s, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Environment, HopperTerminatesWhenFalling) {
    const HopperToy env;
    const auto r = env.step(std::vector<double>{0.5, -1.0, 0.0, 0.0, 0.0}, std::vector<double>{-1.0, 0.0});
    EXPECT_TRUE(r.terminated);
    EXPECT_FALSE(env.terminated(std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}));
}

TEST(Environment, StepIsPure) {
    for (const auto& id : env_ids()) {
        auto env = make_env(id);
        Rng rng = make_rng(3);
        const auto s = env->initial_state(rng);
        const auto a = env->random_action(rng);
        const auto x = env->step(s, a), y = env->step(s, a);
        EXPECT_EQ(x.next_obs, y.next_obs) << id;
        EXPECT_EQ(x.reward, y.reward) << id;
    }
}

TEST(Environment, ReferenceRandomBelowExpert) {
    for (const auto& id : env_ids()) {
        const auto ref = make_env(id)->reference_scores();
        EXPECT_LT(ref.random, ref.expert) << id;
    }
}

TEST(Environment, UnknownIdRejected) { EXPECT_THROW(make_env("Nope"), ConfigError); }

TEST(Dataset, SameSeedIsByteIdentical) {
    const PointMass2D env;
    const auto a = generate_dataset(env, BehaviorTag::medium, 1000, 0.2, 5);
    const auto b = generate_dataset(env, BehaviorTag::medium, 1000, 0.2, 5);
    EXPECT_EQ(encode_dataset(a), encode_dataset(b));
    EXPECT_NE(encode_dataset(a), encode_dataset(generate_dataset(env, BehaviorTag::medium, 1000, 0.2, 6)));
}

TEST(Dataset, RandomTagMatchesRandomReference) {
    // Mean logged episode return of the random tag against the stored reference (100 episodes).
    const PointMass2D env;
    const auto d = generate_dataset(env, BehaviorTag::random, 100 * env.max_episode_steps(), 0.2, 0);
    double total = 0.0;
    for (float r : d.rewards) total += r;
    const double mean_return = total / static_cast<double>(d.initial_indices().size());
    const double ref = env.reference_scores().random;
    EXPECT_LT(std::abs(mean_return - ref), 0.1 * std::abs(ref));
}

TEST(Dataset, SingleTransition) {
    const PointMass2D env;
    const auto d = generate_dataset(env, BehaviorTag::expert, 1, 0.2, 1);
    EXPECT_EQ(d.size(), 1u);
    EXPECT_EQ(d.initial, std::vector<std::uint8_t>{1});
    EXPECT_EQ(d.initial_indices(), std::vector<std::size_t>{0});
}

TEST(Dataset, ExpertBeatsRandomOnEveryEnv) {
    for (const auto& id : env_ids()) {
        auto env = make_env(id);
        auto mean_reward = [&](BehaviorTag tag) {
            const auto d = generate_dataset(*env, tag, 4000, 0.2, 9);
            double s = 0.0;
            for (float r : d.rewards) s += r;
            return s / static_cast<double>(d.size());
        };
        EXPECT_GT(mean_reward(BehaviorTag::expert), mean_reward(BehaviorTag::random)) << id;
    }
}

TEST(Dataset, StoredStatsMatchRecomputed) {
    const PendulumSwing env;
    const auto d = decode_dataset(encode_dataset(generate_dataset(env, BehaviorTag::mixed, 3000, 0.2, 2)));
    const auto s = compute_stats(d);
    auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > 1e-9) return false;
        return a.size() == b.size();
    };
    EXPECT_TRUE(close(d.stats.obs_mean, s.obs_mean));
    EXPECT_TRUE(close(d.stats.obs_std, s.obs_std));
    EXPECT_TRUE(close(d.stats.act_mean, s.act_mean));
    EXPECT_TRUE(close(d.stats.act_std, s.act_std));
    EXPECT_TRUE(close(d.stats.delta_mean, s.delta_mean));
    EXPECT_TRUE(close(d.stats.delta_std, s.delta_std));
    EXPECT_NEAR(d.stats.reward_mean, s.reward_mean, 1e-9);
    EXPECT_NEAR(d.stats.reward_std, s.reward_std, 1e-9);
}

TEST(Dataset, HopperRecordsTerminations) {
    const HopperToy env;
    const auto d = generate_dataset(env, BehaviorTag::random, 3000, 0.2, 4);
    std::size_t done = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.done[i]) {
            ++done;
            EXPECT_EQ(d.successor(i), -1);
            if (i + 1 < d.size()) EXPECT_EQ(d.initial[i + 1], 1);
        }
    EXPECT_GT(done, 0u);
}

TEST(Dataset, FileRoundTripIsExact) {
    testkit::TempDir dir("cbop-ds");
    const PointMass2D env;
    const auto d = generate_dataset(env, BehaviorTag::medium_replay, 777, 0.2, 8);
    save_dataset(d, dir.file("d.cbop"));
    const auto e = load_dataset(dir.file("d.cbop"));
    EXPECT_TRUE(d == e);
    save_dataset(e, dir.file("e.cbop"));
    EXPECT_EQ(binary::read_file(dir.file("d.cbop")), binary::read_file(dir.file("e.cbop")));
}

TEST(Dataset, CorruptMagicRejected) {
    auto bytes = encode_dataset(generate_dataset(PointMass2D{}, BehaviorTag::random, 10, 0.2, 1));
    bytes[0] = 'X';
    try {
        decode_dataset(bytes);
        FAIL() << "expected MagicMismatchError";
    } catch (const MagicMismatchError& e) {
        EXPECT_EQ(e.tag(), "magic-mismatch");
        EXPECT_EQ(e.exit_code(), 3);
    }
}

TEST(Dataset, UnknownVersionRejected) {
    auto bytes = encode_dataset(generate_dataset(PointMass2D{}, BehaviorTag::random, 10, 0.2, 1));
    bytes[4] = 99;
    EXPECT_THROW(decode_dataset(bytes), VersionError);
}

TEST(Dataset, TruncationNamesMissingBytes) {
    auto bytes = encode_dataset(generate_dataset(PointMass2D{}, BehaviorTag::random, 10, 0.2, 1));
    bytes.resize(bytes.size() - 13);
    try {
        decode_dataset(bytes);
        FAIL() << "expected TruncationError";
    } catch (const TruncationError& e) {
        EXPECT_EQ(e.missing_bytes, 13u);
        EXPECT_NE(std::string(e.what()).find("13"), std::string::npos);
    }
}
