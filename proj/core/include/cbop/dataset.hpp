#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbop/env.hpp"

namespace cbop {

enum class BehaviorTag { random, medium, medium_replay, expert, mixed };

std::string to_string(BehaviorTag tag);
BehaviorTag behavior_tag_from_string(const std::string& name);

/// Population mean / standard deviation of each column, computed in double
/// precision from the stored float32 values.
struct NormStats {
    std::vector<double> obs_mean, obs_std;
    std::vector<double> act_mean, act_std;
    std::vector<double> delta_mean, delta_std;  // next_obs - obs
    double reward_mean = 0.0;
    double reward_std = 0.0;

    bool operator==(const NormStats&) const = default;
};

struct Transition {
    std::vector<double> obs;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

/**
 * Offline dataset in columnar float32 layout.
 *
 * `done` marks true terminations (absorbing). Episodes cut by the time limit
 * are not done; the following row then carries the initial-state flag.
 */
struct Dataset {
    std::string env_id;
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    BehaviorTag tag = BehaviorTag::random;
    std::uint64_t seed = 0;

    std::vector<float> obs;
    std::vector<float> actions;
    std::vector<float> rewards;
    std::vector<float> next_obs;
    std::vector<std::uint8_t> done;
    std::vector<std::uint8_t> initial;
    NormStats stats;

    std::size_t size() const { return rewards.size(); }

    std::span<const float> obs_row(std::size_t i) const { return {obs.data() + i * obs_dim, obs_dim}; }
    std::span<const float> action_row(std::size_t i) const { return {actions.data() + i * act_dim, act_dim}; }
    std::span<const float> next_obs_row(std::size_t i) const {
        return {next_obs.data() + i * obs_dim, obs_dim};
    }

    Transition transition(std::size_t i) const;
    void push_back(const Transition& t, bool is_initial);

    /// Index of the row holding the logged successor action of row i, or -1
    /// when the episode ended (termination or time limit) at row i.
    std::ptrdiff_t successor(std::size_t i) const;

    /// Discounted return-to-go along each logged trajectory.
    std::vector<double> discounted_returns(double gamma) const;

    std::vector<std::size_t> initial_indices() const;

    bool operator==(const Dataset&) const = default;
};

NormStats compute_stats(const Dataset& data);

/// Checks column lengths and dims; throws ShapeError on inconsistency.
void validate(const Dataset& data);

Dataset generate_dataset(const Environment& env, BehaviorTag tag, std::size_t size, double noise_scale,
                         std::uint64_t seed);

inline constexpr std::uint32_t dataset_format_version = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Mean undiscounted episode return of the scripted behavior policy for `tag`
/// (random/medium/expert only), by Monte Carlo.
double behavior_policy_return(const Environment& env, BehaviorTag tag, double noise_scale, std::size_t episodes,
                              std::uint64_t seed);

}  // namespace cbop
