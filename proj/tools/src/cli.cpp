#include "cbop_tools/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cbop/agent.hpp"
#include "cbop/checkpoint.hpp"
#include "cbop/config.hpp"
#include "cbop/dataset.hpp"
#include "cbop/dynamics.hpp"
#include "cbop/env.hpp"
#include "cbop/errors.hpp"

namespace fs = std::filesystem;

namespace cbop::cli {

namespace {

std::string class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::config: return "config";
        case ErrorClass::io: return "io";
        case ErrorClass::divergence: return "divergence";
        case ErrorClass::shape: return "shape";
    }
    return "unknown";
}

void prepare_output(const std::string& path, bool overwrite) {
    if (path.empty()) throw ConfigError("an output path is required", "missing-flag");
    if (fs::exists(path) && !overwrite)
        throw IoError("output '" + path + "' already exists; pass --overwrite to replace it", "output-exists");
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("--" + what + " is required", "missing-flag");
    if (!fs::is_regular_file(path)) throw IoError(what + " '" + path + "' does not exist", "missing-file");
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path + "'", "write-failed");
    f << std::setprecision(17);
    return f;
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
    const char* v = std::getenv("CBOP_SEED");
    if (!v || !*v) return fallback;
    try {
        std::size_t used = 0;
        const auto s = std::stoull(v, &used);
        if (used != std::string(v).size()) throw std::invalid_argument("trailing characters");
        return s;
    } catch (const std::exception&) {
        throw ConfigError(std::string("CBOP_SEED='") + v + "' is not an unsigned integer");
    }
}

nlohmann::json load_json(const std::string& path) {
    require_file(path, "config");
    std::ifstream f(path);
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config '" + path + "': " + e.what(), "config-parse");
    }
}

void check_compatible(const AgentState& agent, const Dataset& data) {
    if (agent.critic.obs_dim() != data.obs_dim || agent.critic.act_dim() != data.act_dim)
        throw ShapeError("checkpoint dims (" + std::to_string(agent.critic.obs_dim()) + ", " +
                         std::to_string(agent.critic.act_dim()) + ") do not match dataset dims (" +
                         std::to_string(data.obs_dim) + ", " + std::to_string(data.act_dim) + ")");
    if (agent.env_id != data.env_id)
        throw ShapeError("checkpoint is for " + agent.env_id + " but the dataset is from " + data.env_id);
}

/// Flags that override TrainConfig keys; only flags actually given are applied.
class Overrides {
public:
    template <typename T>
    void add(CLI::App* app, const std::string& flag, const std::string& key, T default_value, const std::string& help) {
        auto value = std::make_shared<T>(default_value);
        CLI::Option* opt = app->add_option(flag, *value, help)->capture_default_str();
        entries_.push_back({opt, [key, value](nlohmann::json& j) { set_key(j, key, *value); }});
    }

    void apply(nlohmann::json& j) const {
        for (const auto& e : entries_)
            if (e.option->count() > 0) e.write(j);
    }

private:
    template <typename T>
    static void set_key(nlohmann::json& j, const std::string& key, const T& v) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) j[key] = v;
        else j[key.substr(0, dot)][key.substr(dot + 1)] = v;
    }

    struct Entry {
        CLI::Option* option;
        std::function<void(nlohmann::json&)> write;
    };
    std::vector<Entry> entries_;
};

void add_train_overrides(CLI::App* app, Overrides& o) {
    const TrainConfig d;
    o.add(app, "--horizon", "horizon", d.horizon, "rollout horizon H");
    o.add(app, "--gamma", "gamma", d.gamma, "discount");
    o.add(app, "--estimator", "estimator", to_string(d.estimator.kind),
          "target estimator: lcb, map, quantile, fixed_lambda, fixed_uniform");
    o.add(app, "--psi", "psi", d.estimator.psi, "LCB coefficient");
    o.add(app, "--lambda", "lambda", d.estimator.lambda, "fixed_lambda weighting");
    o.add(app, "--alpha", "alpha", d.estimator.alpha, "quantile level");
    o.add(app, "--sampling", "sampling", to_string(d.sampling), "single_pass or independent_per_h");
    o.add(app, "--heads", "num_heads", d.num_heads, "Q ensemble size M");
    o.add(app, "--batch-size", "batch_size", d.batch_size, "mini-batch size");
    o.add(app, "--epochs", "epochs", d.epochs, "training epochs");
    o.add(app, "--steps-per-epoch", "steps_per_epoch", d.steps_per_epoch, "gradient steps per epoch");
    o.add(app, "--actor-lr", "actor_lr", d.actor_lr, "actor learning rate");
    o.add(app, "--critic-lr", "critic_lr", d.critic_lr, "critic learning rate");
    o.add(app, "--eta", "eta", d.eta, "diversity penalty coefficient");
    o.add(app, "--entropy-temperature", "entropy_temperature", d.entropy_temperature, "fixed entropy temperature");
    o.add(app, "--eval-episodes", "eval_episodes", d.eval_episodes, "evaluation episodes per epoch");
    o.add(app, "--threads", "threads", d.threads, "maximum worker threads");
    o.add(app, "--seed", "seed", d.seed, "run seed (falls back to CBOP_SEED, then the config)");
}

void add_pretrain_overrides(CLI::App* app, Overrides& o) {
    const TrainConfig d;
    o.add(app, "--members", "dynamics.num_members", d.dynamics.num_members, "dynamics ensemble size");
    o.add(app, "--elites", "dynamics.num_elites", d.dynamics.num_elites, "elite members K");
    o.add(app, "--dynamics-epochs", "dynamics.max_epochs", d.dynamics.max_epochs, "maximum dynamics epochs");
    o.add(app, "--bc-epochs", "bc_epochs", d.bc_epochs, "behavior cloning epochs");
    o.add(app, "--fqe-rounds", "fqe_rounds", d.fqe_rounds, "FQE rounds");
    o.add(app, "--fqe-steps", "fqe_steps_per_round", d.fqe_steps_per_round, "FQE regression steps per round");
}

// config file, then flags; CBOP_SEED replaces the seed only when --seed is absent.
TrainConfig resolve_config(TrainConfig base, const std::string& config_path, const Overrides& o, const CLI::App* app) {
    nlohmann::json patch = nlohmann::json::object();
    if (!config_path.empty()) patch = load_json(config_path);
    o.apply(patch);
    if (app->get_option("--seed")->count() == 0) {
        const char* v = std::getenv("CBOP_SEED");
        if (v && *v) patch["seed"] = env_seed_or(0);
    }
    return train_config_from_json(patch, std::move(base));
}

void write_metrics_header(std::ostream& f) {
    f << "epoch,actor_loss,critic_loss,mean_target,mean_expected_horizon,eval_return,normalized_score\n";
}

void write_metrics_row(std::ostream& f, const EpochMetrics& m) {
    f << m.epoch << ',' << m.actor_loss << ',' << m.critic_loss << ',' << m.mean_target << ','
      << m.mean_expected_horizon << ',' << m.eval_return << ',' << m.normalized_score << '\n';
    f.flush();
}

std::vector<std::size_t> histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
    std::vector<std::size_t> counts(bins, 0);
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    for (double v : values) {
        auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    return counts;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cbop: conservative Bayesian model-based value expansion for offline RL"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a behavior dataset from a built-in environment");
    std::string gen_env = "PointMass2D", gen_tag = "medium", gen_out;
    std::size_t gen_size = 20000;
    double gen_noise = 0.2;
    std::uint64_t gen_seed = 0;
    bool gen_overwrite = false;
    gen->add_option("--env", gen_env, "environment id (PointMass2D, PendulumSwing, HopperToy)")->capture_default_str();
    gen->add_option("--tag", gen_tag, "behavior tag: random, medium, medium_replay, expert, mixed")->capture_default_str();
    gen->add_option("--size", gen_size, "number of transitions")->capture_default_str();
    gen->add_option("--noise", gen_noise, "Gaussian action noise as a fraction of the half range")->capture_default_str();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "seed (falls back to CBOP_SEED)")->capture_default_str();
    gen->add_option("--out", gen_out, "output dataset path")->required();
    gen->add_flag("--overwrite", gen_overwrite, "replace an existing output")->capture_default_str();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "train dynamics, then BC and FQE; writes a checkpoint");
    std::string pre_config, pre_dataset, pre_out, pre_report;
    bool pre_overwrite = false;
    Overrides pre_o;
    pre->add_option("--config", pre_config, "JSON config file (flags take precedence)");
    pre->add_option("--dataset", pre_dataset, "dataset path")->required();
    pre->add_option("--out", pre_out, "output checkpoint path")->required();
    pre->add_option("--report", pre_report, "optional dynamics report CSV (member, validation_nll, epochs, elite)");
    pre->add_flag("--overwrite", pre_overwrite, "replace existing outputs")->capture_default_str();
    add_train_overrides(pre, pre_o);
    add_pretrain_overrides(pre, pre_o);

    // train
    auto* tr = app.add_subcommand("train", "run conservative actor-critic training from a pretrained checkpoint");
    std::string tr_config, tr_dataset, tr_checkpoint, tr_ckpt_dir = "checkpoints", tr_metrics_dir = "metrics";
    std::size_t tr_save_every = 0;
    bool tr_overwrite = false;
    Overrides tr_o;
    tr->add_option("--config", tr_config, "JSON config file (flags take precedence)");
    tr->add_option("--dataset", tr_dataset, "dataset path")->required();
    tr->add_option("--checkpoint", tr_checkpoint, "pretrained checkpoint")->required();
    tr->add_option("--checkpoint-dir", tr_ckpt_dir, "directory for initial/final checkpoints")->capture_default_str();
    tr->add_option("--metrics-dir", tr_metrics_dir, "directory for metrics.csv")->capture_default_str();
    tr->add_option("--save-every", tr_save_every, "also checkpoint every N epochs (0 = never)")->capture_default_str();
    tr->add_flag("--overwrite", tr_overwrite, "replace existing outputs")->capture_default_str();
    add_train_overrides(tr, tr_o);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate the deterministic policy of a checkpoint");
    std::string ev_checkpoint, ev_env, ev_out;
    std::size_t ev_episodes = 20;
    std::uint64_t ev_seed = 0;
    bool ev_overwrite = false;
    ev->add_option("--checkpoint", ev_checkpoint, "checkpoint path")->required();
    ev->add_option("--env", ev_env, "environment id (default: the checkpoint's)");
    ev->add_option("--episodes", ev_episodes, "evaluation episodes")->capture_default_str();
    auto* ev_seed_opt = ev->add_option("--seed", ev_seed, "seed (falls back to CBOP_SEED)")->capture_default_str();
    ev->add_option("--out", ev_out, "scores CSV (episode, return, normalized_score)");
    ev->add_flag("--overwrite", ev_overwrite, "replace an existing output")->capture_default_str();

    // diagnose
    auto* dg = app.add_subcommand("diagnose", "conservatism, expected-horizon and variance-ratio diagnostics");
    std::string dg_checkpoint, dg_dataset, dg_out_dir = "diagnostics";
    std::size_t dg_states = 100, dg_transitions = 256, dg_bins = 50;
    std::uint64_t dg_seed = 0;
    bool dg_overwrite = false;
    dg->add_option("--checkpoint", dg_checkpoint, "checkpoint path")->required();
    dg->add_option("--dataset", dg_dataset, "dataset path")->required();
    dg->add_option("--out-dir", dg_out_dir, "output directory")->capture_default_str();
    dg->add_option("--states", dg_states, "dataset states for the conservatism gap")->capture_default_str();
    dg->add_option("--transitions", dg_transitions, "transitions for weight and variance histograms")->capture_default_str();
    dg->add_option("--bins", dg_bins, "histogram bins")->capture_default_str();
    auto* dg_seed_opt = dg->add_option("--seed", dg_seed, "seed (falls back to CBOP_SEED)")->capture_default_str();
    dg->add_flag("--overwrite", dg_overwrite, "replace existing outputs")->capture_default_str();

    // rank
    auto* rk = app.add_subcommand("rank", "rank checkpoints by FQE value on dataset initial states");
    std::vector<std::string> rk_checkpoints;
    std::vector<std::size_t> rk_reference;
    std::string rk_dataset, rk_out;
    RankConfig rk_cfg;
    rk_cfg.fqe.rounds = 20;
    rk_cfg.fqe.steps_per_round = 100;
    std::uint64_t rk_seed = 0;
    bool rk_overwrite = false;
    rk->add_option("--checkpoints", rk_checkpoints, "two or more checkpoints")->required();
    rk->add_option("--dataset", rk_dataset, "dataset path")->required();
    rk->add_option("--reference", rk_reference, "reference rank per checkpoint (1 = best)");
    rk->add_option("--fqe-rounds", rk_cfg.fqe.rounds, "FQE rounds")->capture_default_str();
    rk->add_option("--fqe-steps", rk_cfg.fqe.steps_per_round, "FQE regression steps per round")->capture_default_str();
    rk->add_option("--fqe-lr", rk_cfg.fqe.lr, "FQE learning rate")->capture_default_str();
    rk->add_option("--batch-size", rk_cfg.fqe.batch_size, "FQE mini-batch size")->capture_default_str();
    rk->add_option("--gamma", rk_cfg.fqe.gamma, "discount")->capture_default_str();
    rk->add_option("--heads", rk_cfg.num_heads, "evaluator ensemble size")->capture_default_str();
    auto* rk_seed_opt = rk->add_option("--seed", rk_seed, "seed (falls back to CBOP_SEED)")->capture_default_str();
    rk->add_option("--out", rk_out, "ranking CSV (checkpoint, score, rank)");
    rk->add_flag("--overwrite", rk_overwrite, "replace an existing output")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: class=config tag=bad-arguments " << e.what() << '\n';
        return static_cast<int>(ErrorClass::config);
    }

    try {
        if (gen->parsed()) {
            const auto env = make_env(gen_env);
            const auto seed = gen_seed_opt->count() ? gen_seed : env_seed_or(gen_seed);
            prepare_output(gen_out, gen_overwrite);
            const Dataset data = generate_dataset(*env, behavior_tag_from_string(gen_tag), gen_size, gen_noise, seed);
            save_dataset(data, gen_out);
            out << "wrote " << data.size() << " transitions to " << gen_out << '\n';
        } else if (pre->parsed()) {
            const TrainConfig cfg = resolve_config(TrainConfig{}, pre_config, pre_o, pre);
            require_file(pre_dataset, "dataset");
            prepare_output(pre_out, pre_overwrite);
            if (!pre_report.empty()) prepare_output(pre_report, pre_overwrite);
            const Dataset data = load_dataset(pre_dataset);
            const auto env = make_env(data.env_id);
            DynamicsConfig dcfg = cfg.dynamics;
            dcfg.seed = derive_seed(cfg.seed, {0xd7a});
            DynamicsTrainReport report;
            DynamicsEnsemble dynamics = train_dynamics(data, dcfg, &report);
            AgentState agent = make_agent(*env, cfg, std::move(dynamics));
            const BcReport bc = bc_pretrain(agent.policy, data,
                                            {cfg.bc_epochs, cfg.bc_batch_size, cfg.bc_lr, 0.1, derive_seed(cfg.seed, {0xbc})});
            FqeConfig fqe{cfg.fqe_rounds, cfg.fqe_steps_per_round, cfg.batch_size, cfg.fqe_lr, cfg.gamma,
                          NextAction::recorded, derive_seed(cfg.seed, {0xf0e})};
            fqe_pretrain(agent.critic, agent.policy, data, fqe);
            save_checkpoint(agent, pre_out);
            if (!pre_report.empty()) {
                auto f = open_csv(pre_report);
                f << "member,validation_nll,epochs_run,elite\n";
                for (std::size_t m = 0; m < report.validation_nll.size(); ++m)
                    f << m << ',' << report.validation_nll[m] << ',' << report.epochs_run[m] << ','
                      << (agent.dynamics.is_elite(m) ? 1 : 0) << '\n';
            }
            out << "bc holdout mse " << bc.holdout_mse_before << " -> " << bc.holdout_mse_after << '\n';
            out << "wrote " << pre_out << '\n';
        } else if (tr->parsed()) {
            require_file(tr_checkpoint, "checkpoint");
            require_file(tr_dataset, "dataset");
            AgentState agent = load_checkpoint(tr_checkpoint);
            const TrainConfig cfg = resolve_config(agent.config, tr_config, tr_o, tr);
            if (cfg.num_heads != agent.critic.num_heads())
                throw ShapeError("checkpoint has " + std::to_string(agent.critic.num_heads()) +
                                 " Q heads but the config asks for " + std::to_string(cfg.num_heads));
            agent.config = cfg;
            agent.actor_opt.learning_rate = cfg.actor_lr;
            for (auto& o : agent.critic_opt) o.learning_rate = cfg.critic_lr;
            agent.policy.set_entropy_temperature(cfg.entropy_temperature);
            agent.critic.set_target_update_rate(cfg.target_update_rate);
            const Dataset data = load_dataset(tr_dataset);
            check_compatible(agent, data);
            const auto env = make_env(agent.env_id);

            const std::string metrics_path = (fs::path(tr_metrics_dir) / "metrics.csv").string();
            const std::string initial_path = (fs::path(tr_ckpt_dir) / "initial.cbpc").string();
            const std::string final_path = (fs::path(tr_ckpt_dir) / "final.cbpc").string();
            for (const auto& p : {metrics_path, initial_path, final_path}) prepare_output(p, tr_overwrite);

            auto csv = open_csv(metrics_path);
            write_metrics_header(csv);
            save_checkpoint(agent, initial_path);
            for (std::size_t e = 0; e < cfg.epochs; ++e) {
                try {
                    const EpochMetrics m = cbop_train_epoch(agent, data, env.get());
                    write_metrics_row(csv, m);
                    out << "epoch " << m.epoch << " target " << m.mean_target << " horizon "
                        << m.mean_expected_horizon << " return " << m.eval_return << '\n';
                } catch (const DivergenceError& d) {
                    std::ofstream diag(fs::path(tr_metrics_dir) / "divergence.json");
                    diag << nlohmann::json{{"epoch", agent.epoch + 1}, {"message", d.what()},
                                           {"config", to_json(agent.config)}}
                                .dump(2)
                         << '\n';
                    throw;
                }
                if (tr_save_every > 0 && agent.epoch % tr_save_every == 0) {
                    std::ostringstream name;
                    name << "epoch_" << std::setw(4) << std::setfill('0') << agent.epoch << ".cbpc";
                    save_checkpoint(agent, (fs::path(tr_ckpt_dir) / name.str()).string());
                }
            }
            save_checkpoint(agent, final_path);
            out << "wrote " << final_path << " and " << metrics_path << '\n';
        } else if (ev->parsed()) {
            require_file(ev_checkpoint, "checkpoint");
            const AgentState agent = load_checkpoint(ev_checkpoint);
            const auto env = make_env(ev_env.empty() ? agent.env_id : ev_env);
            const auto seed = ev_seed_opt->count() ? ev_seed : env_seed_or(ev_seed);
            if (!ev_out.empty()) prepare_output(ev_out, ev_overwrite);
            const EvalResult r = evaluate_policy(agent.policy, *env, ev_episodes, seed);
            if (!ev_out.empty()) {
                auto f = open_csv(ev_out);
                f << "episode,return,normalized_score\n";
                for (std::size_t i = 0; i < r.returns.size(); ++i)
                    f << i << ',' << r.returns[i] << ',' << env->normalized_score(r.returns[i]) << '\n';
            }
            out << std::setprecision(10) << "mean_return=" << r.mean_return << " normalized_score=" << r.normalized_score
                << '\n';
        } else if (dg->parsed()) {
            require_file(dg_checkpoint, "checkpoint");
            require_file(dg_dataset, "dataset");
            const AgentState agent = load_checkpoint(dg_checkpoint);
            const Dataset data = load_dataset(dg_dataset);
            check_compatible(agent, data);
            const auto env = make_env(agent.env_id);
            const auto seed = dg_seed_opt->count() ? dg_seed : env_seed_or(dg_seed);
            const fs::path dir(dg_out_dir);
            const std::vector<std::string> files = {"conservatism.csv", "expected_horizon.csv", "variance_ratio_hist.csv",
                                                    "returns_hist.csv"};
            for (const auto& f : files) prepare_output((dir / f).string(), dg_overwrite);

            const GapResult gap = conservatism_gap(agent.policy, agent.critic, *env, data, dg_states, agent.config.gamma, seed);
            {
                auto f = open_csv((dir / files[0]).string());
                f << "index,predicted,monte_carlo,gap\n";
                for (const auto& r : gap.rows)
                    f << r.index << ',' << r.predicted << ',' << r.monte_carlo << ',' << r.predicted - r.monte_carlo << '\n';
            }
            {
                auto f = open_csv((dir / files[1]).string());
                const std::size_t H = agent.config.horizon;
                f << "epoch,mean_expected_horizon";
                for (std::size_t h = 0; h <= H; ++h) f << ",w_" << h;
                f << '\n';
                for (const auto& m : agent.log) {
                    f << m.epoch << ',' << m.mean_expected_horizon;
                    for (std::size_t h = 0; h <= H; ++h) f << ',' << (h < m.mean_weights.size() ? m.mean_weights[h] : 0.0);
                    f << '\n';
                }
            }
            const std::size_t H = agent.config.horizon;
            std::vector<std::vector<double>> ratios(H + 1), returns(H + 1);
            const RolloutConfig rc = rollout_config(agent.config, agent.env_id);
            Rng rng = make_rng(seed, {0xd1a9});
            std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
            for (std::size_t i = 0; i < dg_transitions; ++i) {
                const auto grid = sample_returns(data.transition(pick(rng)), agent.policy, agent.dynamics, agent.critic,
                                                 rc, derive_seed(seed, {0xd1a9, i}));
                const auto ratio = variance_ratio(likelihood_params(grid));
                for (std::size_t h = 0; h <= H; ++h) {
                    ratios[h].push_back(ratio[h]);
                    for (std::size_t k = 0; k < grid.particles; ++k)
                        for (std::size_t m = 0; m < grid.heads; ++m) returns[h].push_back(grid.at(h, k, m));
                }
            }
            {
                auto f = open_csv((dir / files[2]).string());
                f << "horizon,bin_lo,bin_hi,count\n";
                for (std::size_t h = 0; h <= H; ++h) {
                    const auto c = histogram(ratios[h], 0.0, 1.0, dg_bins);
                    for (std::size_t b = 0; b < dg_bins; ++b)
                        f << h << ',' << static_cast<double>(b) / dg_bins << ',' << static_cast<double>(b + 1) / dg_bins
                          << ',' << c[b] << '\n';
                }
            }
            {
                auto f = open_csv((dir / files[3]).string());
                f << "horizon,bin_lo,bin_hi,count\n";
                for (std::size_t h = 0; h <= H; ++h) {
                    const auto [lo_it, hi_it] = std::minmax_element(returns[h].begin(), returns[h].end());
                    const double lo = returns[h].empty() ? 0.0 : *lo_it, hi = returns[h].empty() ? 1.0 : *hi_it;
                    const double width = hi > lo ? (hi - lo) / static_cast<double>(dg_bins) : 1.0;
                    const auto c = histogram(returns[h], lo, hi, dg_bins);
                    for (std::size_t b = 0; b < dg_bins; ++b)
                        f << h << ',' << lo + width * static_cast<double>(b) << ',' << lo + width * static_cast<double>(b + 1)
                          << ',' << c[b] << '\n';
                }
            }
            out << std::setprecision(10) << "conservatism_gap_mean=" << gap.mean << " conservatism_gap_max=" << gap.max
                << '\n';
        } else if (rk->parsed()) {
            if (rk_checkpoints.size() < 2) throw InsufficientDataError("rank needs at least 2 checkpoints");
            if (!rk_reference.empty() && rk_reference.size() != rk_checkpoints.size())
                throw ConfigError("--reference must give one rank per checkpoint");
            require_file(rk_dataset, "dataset");
            const Dataset data = load_dataset(rk_dataset);
            std::vector<PolicyNet> policies;
            for (const auto& path : rk_checkpoints) {
                require_file(path, "checkpoint");
                const AgentState agent = load_checkpoint(path);
                check_compatible(agent, data);
                policies.push_back(agent.policy);
            }
            if (!rk_out.empty()) prepare_output(rk_out, rk_overwrite);
            rk_cfg.fqe.seed = rk_seed_opt->count() ? rk_seed : env_seed_or(rk_seed);
            std::optional<std::vector<std::size_t>> reference;
            if (!rk_reference.empty()) reference = rk_reference;
            const RankResult r = fqe_rank_hyperparams(policies, data, rk_cfg, reference);
            if (!rk_out.empty()) {
                auto f = open_csv(rk_out);
                f << "checkpoint,score,rank\n";
                for (std::size_t i = 0; i < policies.size(); ++i)
                    f << rk_checkpoints[i] << ',' << r.scores[i] << ',' << r.ranks[i] << '\n';
            }
            for (std::size_t i = 0; i < policies.size(); ++i)
                out << rk_checkpoints[i] << " score=" << r.scores[i] << " rank=" << r.ranks[i] << '\n';
            if (r.spearman) out << "spearman=" << *r.spearman << '\n';
        }
    } catch (const Error& e) {
        err << "error: class=" << class_name(e.error_class()) << " tag=" << e.tag() << ' ' << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "error: class=io tag=filesystem " << e.what() << '\n';
        return static_cast<int>(ErrorClass::io);
    }
    return 0;
}

}  // namespace cbop::cli
