#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cbop/rng.hpp"

namespace cbop {

struct ReferenceScores {
    double random = 0.0;
    double expert = 1.0;
};

struct StepResult {
    std::vector<double> next_obs;
    double reward = 0.0;
    bool terminated = false;
};

/// Deterministic, fully observed toy environment. Observations are the full
/// state, so any logged observation can be used as a reset point.
/// `step` reports only the termination predicate; episode truncation at
/// max_episode_steps() is the caller's business and is not an absorbing state.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string id() const = 0;
    virtual std::size_t obs_dim() const = 0;
    virtual std::size_t act_dim() const = 0;
    virtual std::vector<double> action_low() const = 0;
    virtual std::vector<double> action_high() const = 0;
    virtual std::size_t max_episode_steps() const { return 200; }
    virtual ReferenceScores reference_scores() const = 0;

    /// Actions outside the box are clamped.
    virtual StepResult step(std::span<const double> obs, std::span<const double> action) const = 0;
    virtual bool terminated(std::span<const double> /*obs*/) const { return false; }
    virtual std::vector<double> initial_state(Rng& rng) const = 0;
    virtual bool supports_reset_to_state() const { return true; }

    /// Scripted controllers used to log datasets of graded quality.
    virtual std::vector<double> expert_action(std::span<const double> obs) const = 0;
    virtual std::vector<double> medium_action(std::span<const double> obs) const = 0;

    std::vector<double> clamp_action(std::span<const double> action) const;
    std::vector<double> random_action(Rng& rng) const;
    double normalized_score(double episode_return) const;
};

/// PointMass2D: obs (px, py, vx, vy), action (ax, ay) in [-max_accel, max_accel]^2.
class PointMass2D final : public Environment {
public:
    static constexpr double dt = 0.05;
    static constexpr double max_accel = 0.3;
    std::string id() const override { return "PointMass2D"; }
    std::size_t obs_dim() const override { return 4; }
    std::size_t act_dim() const override { return 2; }
    std::vector<double> action_low() const override { return {-max_accel, -max_accel}; }
    std::vector<double> action_high() const override { return {max_accel, max_accel}; }
    ReferenceScores reference_scores() const override;
    StepResult step(std::span<const double> obs, std::span<const double> action) const override;
    std::vector<double> initial_state(Rng& rng) const override;
    std::vector<double> expert_action(std::span<const double> obs) const override;
    std::vector<double> medium_action(std::span<const double> obs) const override;
};

/// PendulumSwing: obs (cos th, sin th, th_dot) with th = 0 upright, torque in [-2, 2].
class PendulumSwing final : public Environment {
public:
    static constexpr double dt = 0.05;
    static constexpr double max_speed = 8.0;
    std::string id() const override { return "PendulumSwing"; }
    std::size_t obs_dim() const override { return 3; }
    std::size_t act_dim() const override { return 1; }
    std::vector<double> action_low() const override { return {-2.0}; }
    std::vector<double> action_high() const override { return {2.0}; }
    ReferenceScores reference_scores() const override;
    StepResult step(std::span<const double> obs, std::span<const double> action) const override;
    std::vector<double> initial_state(Rng& rng) const override;
    std::vector<double> expert_action(std::span<const double> obs) const override;
    std::vector<double> medium_action(std::span<const double> obs) const override;
};

/// HopperToy: obs (height, vertical vel, forward vel, pitch, pitch rate),
/// action (thrust, torque) in [-1, 1]^2. Terminates when it falls below a
/// minimum height or tips over.
class HopperToy final : public Environment {
public:
    static constexpr double dt = 0.05;
    static constexpr double min_height = 0.5;
    static constexpr double max_pitch = 0.8;
    std::string id() const override { return "HopperToy"; }
    std::size_t obs_dim() const override { return 5; }
    std::size_t act_dim() const override { return 2; }
    std::vector<double> action_low() const override { return {-1.0, -1.0}; }
    std::vector<double> action_high() const override { return {1.0, 1.0}; }
    ReferenceScores reference_scores() const override;
    StepResult step(std::span<const double> obs, std::span<const double> action) const override;
    bool terminated(std::span<const double> obs) const override;
    std::vector<double> initial_state(Rng& rng) const override;
    std::vector<double> expert_action(std::span<const double> obs) const override;
    std::vector<double> medium_action(std::span<const double> obs) const override;
};

std::unique_ptr<Environment> make_env(const std::string& env_id);
std::vector<std::string> env_ids();

}  // namespace cbop
