#include "cbop/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbop/errors.hpp"

namespace cbop {

namespace {

double clampd(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double angle_normalize(double th) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(th + std::numbers::pi, two_pi);
    if (r < 0) r += two_pi;
    return r - std::numbers::pi;
}

}  // namespace

std::vector<double> Environment::clamp_action(std::span<const double> action) const {
    if (action.size() != act_dim()) throw ShapeError("action has wrong dimension", "input-shape");
    const auto lo = action_low(), hi = action_high();
    std::vector<double> a(action.begin(), action.end());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = clampd(a[j], lo[j], hi[j]);
    return a;
}

std::vector<double> Environment::random_action(Rng& rng) const {
    const auto lo = action_low(), hi = action_high();
    std::vector<double> a(act_dim());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = uniform(rng, lo[j], hi[j]);
    return a;
}

double Environment::normalized_score(double episode_return) const {
    const auto ref = reference_scores();
    return 100.0 * (episode_return - ref.random) / (ref.expert - ref.random);
}

// ---------------------------------------------------------------- PointMass2D

ReferenceScores PointMass2D::reference_scores() const { return {-183.692765, -16.2094607}; }

StepResult PointMass2D::step(std::span<const double> obs, std::span<const double> action) const {
    if (obs.size() != 4) throw ShapeError("PointMass2D expects a 4-dim observation", "input-shape");
    const auto a = clamp_action(action);
    StepResult out;
    const double vx = obs[2] + dt * a[0];
    const double vy = obs[3] + dt * a[1];
    out.next_obs = {obs[0] + dt * vx, obs[1] + dt * vy, vx, vy};
    out.reward = -(obs[0] * obs[0] + obs[1] * obs[1]) - 0.01 * (a[0] * a[0] + a[1] * a[1]);
    out.terminated = false;
    return out;
}

std::vector<double> PointMass2D::initial_state(Rng& rng) const {
    return {uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), 0.0, 0.0};
}

std::vector<double> PointMass2D::expert_action(std::span<const double> obs) const {
    constexpr double kp = 3.0, kd = 2.6;
    return clamp_action(std::vector<double>{-kp * obs[0] - kd * obs[2], -kp * obs[1] - kd * obs[3]});
}

std::vector<double> PointMass2D::medium_action(std::span<const double> obs) const {
    constexpr double kp = 0.05, kd = 0.3;
    return clamp_action(std::vector<double>{-kp * obs[0] - kd * obs[2], -kp * obs[1] - kd * obs[3]});
}

// -------------------------------------------------------------- PendulumSwing

ReferenceScores PendulumSwing::reference_scores() const { return {-1228.44713, -150.094593}; }

StepResult PendulumSwing::step(std::span<const double> obs, std::span<const double> action) const {
    if (obs.size() != 3) throw ShapeError("PendulumSwing expects a 3-dim observation", "input-shape");
    const auto a = clamp_action(action);
    const double th = std::atan2(obs[1], obs[0]);
    const double thdot = obs[2];
    const double u = a[0];
    constexpr double g = 10.0, m = 1.0, l = 1.0;
    StepResult out;
    out.reward = -(std::pow(angle_normalize(th), 2) + 0.1 * thdot * thdot + 0.001 * u * u);
    const double new_thdot =
        clampd(thdot + (3.0 * g / (2.0 * l) * std::sin(th) + 3.0 / (m * l * l) * u) * dt, -max_speed, max_speed);
    const double new_th = th + new_thdot * dt;
    out.next_obs = {std::cos(new_th), std::sin(new_th), new_thdot};
    out.terminated = false;
    return out;
}

std::vector<double> PendulumSwing::initial_state(Rng& rng) const {
    const double th = uniform(rng, -std::numbers::pi, std::numbers::pi);
    return {std::cos(th), std::sin(th), uniform(rng, -1.0, 1.0)};
}

std::vector<double> PendulumSwing::expert_action(std::span<const double> obs) const {
    const double th = std::atan2(obs[1], obs[0]);
    const double thdot = obs[2];
    if (std::abs(th) < 0.35) return clamp_action(std::vector<double>{-(10.0 * th + 2.0 * thdot)});
    // Energy pumping: zero energy at rest upright.
    const double energy = 0.5 * thdot * thdot + 15.0 * (std::cos(th) - 1.0);
    const double u = 2.0 * (thdot >= 0 ? 1.0 : -1.0) * (energy < 0 ? 1.0 : -0.2);
    return clamp_action(std::vector<double>{u});
}

std::vector<double> PendulumSwing::medium_action(std::span<const double> obs) const {
    const double th = std::atan2(obs[1], obs[0]);
    const double thdot = obs[2];
    if (std::abs(th) < 0.35) return clamp_action(std::vector<double>{-(10.0 * th + 2.0 * thdot)});
    return clamp_action(std::vector<double>{thdot >= 0 ? 1.0 : -1.0});
}

// ------------------------------------------------------------------ HopperToy

ReferenceScores HopperToy::reference_scores() const { return {100.644798, 516.118546}; }

StepResult HopperToy::step(std::span<const double> obs, std::span<const double> action) const {
    if (obs.size() != 5) throw ShapeError("HopperToy expects a 5-dim observation", "input-shape");
    const auto a = clamp_action(action);
    const double z = obs[0], vz = obs[1], vx = obs[2], phi = obs[3], omega = obs[4];
    const double thrust = 1.0 + a[0];
    const double new_vz = vz + dt * (thrust * std::cos(phi) - 1.0);
    const double new_vx = vx + dt * (thrust * std::sin(phi) - 0.1 * vx);
    const double new_omega = omega + dt * (2.0 * a[1] - 0.5 * omega);
    StepResult out;
    out.next_obs = {z + dt * new_vz, new_vz, new_vx, phi + dt * new_omega, new_omega};
    out.reward = vx + 1.0 - 0.01 * (a[0] * a[0] + a[1] * a[1]);
    out.terminated = terminated(out.next_obs);
    return out;
}

bool HopperToy::terminated(std::span<const double> obs) const {
    return obs[0] < min_height || std::abs(obs[3]) > max_pitch;
}

std::vector<double> HopperToy::initial_state(Rng& rng) const {
    return {1.0 + uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05),
            uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05)};
}

namespace {

std::vector<double> hopper_controller(std::span<const double> obs, double target_pitch) {
    const double z = obs[0], vz = obs[1], phi = obs[3], omega = obs[4];
    const double hover = 1.0 / std::max(std::cos(phi), 0.5) - 1.0;
    const double thrust = hover + 2.0 * (1.0 - z) - 1.5 * vz;
    const double torque = 2.0 * (target_pitch - phi) - 1.0 * omega;
    return {clampd(thrust, -1.0, 1.0), clampd(torque, -1.0, 1.0)};
}

}  // namespace

std::vector<double> HopperToy::expert_action(std::span<const double> obs) const {
    return hopper_controller(obs, 0.45);
}

std::vector<double> HopperToy::medium_action(std::span<const double> obs) const {
    return hopper_controller(obs, 0.15);
}

// -------------------------------------------------------------------- factory

std::unique_ptr<Environment> make_env(const std::string& env_id) {
    if (env_id == "PointMass2D") return std::make_unique<PointMass2D>();
    if (env_id == "PendulumSwing") return std::make_unique<PendulumSwing>();
    if (env_id == "HopperToy") return std::make_unique<HopperToy>();
    throw ConfigError("unknown environment '" + env_id + "'", "unknown-env");
}

std::vector<std::string> env_ids() { return {"PointMass2D", "PendulumSwing", "HopperToy"}; }

}  // namespace cbop
