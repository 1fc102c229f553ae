#include "cbop/config.hpp"

#include <functional>
#include <map>
#include <string>

#include "cbop/errors.hpp"

namespace cbop {

namespace {

using Setter = std::function<void(const nlohmann::json&)>;

template <typename T>
Setter set(T& field) {
    return [&field](const nlohmann::json& v) { field = v.get<T>(); };
}

void apply(const nlohmann::json& j, const std::map<std::string, Setter>& setters, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object", "config-parse");
    for (const auto& [key, value] : j.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown config key '" + where + key + "'", "unknown-key");
        try {
            it->second(value);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for '" + where + key + "': " + e.what(), "config-parse");
        }
    }
}

}  // namespace

nlohmann::json to_json(const DynamicsConfig& c) {
    return {{"num_members", c.num_members},     {"num_elites", c.num_elites},
            {"hidden", c.hidden},               {"activation", to_string(c.activation)},
            {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
            {"patience", c.patience},           {"learning_rate", c.learning_rate},
            {"validation_fraction", c.validation_fraction},
            {"full_bootstrap", c.full_bootstrap}, {"logvar_min", c.logvar_min},
            {"logvar_max", c.logvar_max}};
}

DynamicsConfig dynamics_config_from_json(const nlohmann::json& j, DynamicsConfig c) {
    std::string activation = to_string(c.activation);
    apply(j,
          {{"num_members", set(c.num_members)},
           {"num_elites", set(c.num_elites)},
           {"hidden", set(c.hidden)},
           {"activation", set(activation)},
           {"batch_size", set(c.batch_size)},
           {"max_epochs", set(c.max_epochs)},
           {"patience", set(c.patience)},
           {"learning_rate", set(c.learning_rate)},
           {"validation_fraction", set(c.validation_fraction)},
           {"full_bootstrap", set(c.full_bootstrap)},
           {"logvar_min", set(c.logvar_min)},
           {"logvar_max", set(c.logvar_max)}},
          "dynamics.");
    c.activation = activation_from_string(activation);
    if (c.num_members == 0 || c.num_elites == 0 || c.num_elites > c.num_members)
        throw ConfigError("dynamics needs 1 <= num_elites <= num_members");
    if (!(c.logvar_min < c.logvar_max)) throw ConfigError("logvar_min must be below logvar_max");
    return c;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"horizon", c.horizon},
            {"gamma", c.gamma},
            {"estimator", to_string(c.estimator.kind)},
            {"psi", c.estimator.psi},
            {"lambda", c.estimator.lambda},
            {"alpha", c.estimator.alpha},
            {"sampling", to_string(c.sampling)},
            {"num_heads", c.num_heads},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"steps_per_epoch", c.steps_per_epoch},
            {"actor_lr", c.actor_lr},
            {"critic_lr", c.critic_lr},
            {"target_update_rate", c.target_update_rate},
            {"entropy_temperature", c.entropy_temperature},
            {"eta", c.eta},
            {"actor_objective", c.actor_objective == ActorObjective::mean ? "mean" : "min"},
            {"policy_hidden", c.policy_hidden},
            {"critic_hidden", c.critic_hidden},
            {"activation", to_string(c.activation)},
            {"bc_epochs", c.bc_epochs},
            {"bc_batch_size", c.bc_batch_size},
            {"bc_lr", c.bc_lr},
            {"fqe_rounds", c.fqe_rounds},
            {"fqe_steps_per_round", c.fqe_steps_per_round},
            {"fqe_lr", c.fqe_lr},
            {"eval_episodes", c.eval_episodes},
            {"threads", c.threads},
            {"seed", c.seed},
            {"dynamics", to_json(c.dynamics)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    std::string estimator = to_string(c.estimator.kind), sampling = to_string(c.sampling);
    std::string objective = c.actor_objective == ActorObjective::mean ? "mean" : "min";
    std::string activation = to_string(c.activation);
    nlohmann::json dynamics = nlohmann::json::object();
    apply(j,
          {{"horizon", set(c.horizon)},
           {"gamma", set(c.gamma)},
           {"estimator", set(estimator)},
           {"psi", set(c.estimator.psi)},
           {"lambda", set(c.estimator.lambda)},
           {"alpha", set(c.estimator.alpha)},
           {"sampling", set(sampling)},
           {"num_heads", set(c.num_heads)},
           {"batch_size", set(c.batch_size)},
           {"epochs", set(c.epochs)},
           {"steps_per_epoch", set(c.steps_per_epoch)},
           {"actor_lr", set(c.actor_lr)},
           {"critic_lr", set(c.critic_lr)},
           {"target_update_rate", set(c.target_update_rate)},
           {"entropy_temperature", set(c.entropy_temperature)},
           {"eta", set(c.eta)},
           {"actor_objective", set(objective)},
           {"policy_hidden", set(c.policy_hidden)},
           {"critic_hidden", set(c.critic_hidden)},
           {"activation", set(activation)},
           {"bc_epochs", set(c.bc_epochs)},
           {"bc_batch_size", set(c.bc_batch_size)},
           {"bc_lr", set(c.bc_lr)},
           {"fqe_rounds", set(c.fqe_rounds)},
           {"fqe_steps_per_round", set(c.fqe_steps_per_round)},
           {"fqe_lr", set(c.fqe_lr)},
           {"eval_episodes", set(c.eval_episodes)},
           {"threads", set(c.threads)},
           {"seed", set(c.seed)},
           {"dynamics", set(dynamics)}},
          "");
    c.estimator.kind = estimator_kind_from_string(estimator);
    c.sampling = sampling_mode_from_string(sampling);
    if (objective == "mean") c.actor_objective = ActorObjective::mean;
    else if (objective == "min") c.actor_objective = ActorObjective::min;
    else throw ConfigError("actor_objective must be 'mean' or 'min'");
    c.activation = activation_from_string(activation);
    c.dynamics = dynamics_config_from_json(dynamics, c.dynamics);
    c.validate();
    return c;
}

nlohmann::json to_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},
            {"actor_loss", m.actor_loss},
            {"critic_loss", m.critic_loss},
            {"mean_target", m.mean_target},
            {"mean_expected_horizon", m.mean_expected_horizon},
            {"eval_return", m.eval_return},
            {"normalized_score", m.normalized_score},
            {"mean_weights", m.mean_weights}};
}

EpochMetrics epoch_metrics_from_json(const nlohmann::json& j) {
    EpochMetrics m;
    j.at("epoch").get_to(m.epoch);
    j.at("actor_loss").get_to(m.actor_loss);
    j.at("critic_loss").get_to(m.critic_loss);
    j.at("mean_target").get_to(m.mean_target);
    j.at("mean_expected_horizon").get_to(m.mean_expected_horizon);
    j.at("eval_return").get_to(m.eval_return);
    j.at("normalized_score").get_to(m.normalized_score);
    j.at("mean_weights").get_to(m.mean_weights);
    return m;
}

}  // namespace cbop
