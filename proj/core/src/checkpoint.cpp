#include "cbop/checkpoint.hpp"

#include <cstring>
#include <span>

#include <nlohmann/json.hpp>

#include "cbop/binary_io.hpp"
#include "cbop/config.hpp"
#include "cbop/errors.hpp"

namespace cbop {

namespace {

constexpr char checkpoint_magic[4] = {'C', 'B', 'P', 'C'};

nlohmann::json net_json(const DenseNet& net) {
    return {{"layers", net.layer_sizes()},
            {"hidden", to_string(net.hidden_activation())},
            {"output", to_string(net.output_activation())}};
}

DenseNet net_from_json(const nlohmann::json& j) {
    return DenseNet::zeros(j.at("layers").get<std::vector<std::size_t>>(),
                           activation_from_string(j.at("hidden").get<std::string>()),
                           activation_from_string(j.at("output").get<std::string>()));
}

nlohmann::json adam_json(const AdamState& s) {
    return {{"step_count", s.step_count}, {"learning_rate", s.learning_rate}, {"beta1", s.beta1},
            {"beta2", s.beta2},           {"epsilon", s.epsilon},             {"size", s.first_moment.size()}};
}

AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s(j.at("size").get<std::size_t>(), j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
                j.at("beta2").get<double>(), j.at("epsilon").get<double>());
    j.at("step_count").get_to(s.step_count);
    return s;
}

class BlockWriter {
public:
    void add(const std::string& name, std::span<const double> values) {
        blocks_.push_back({{"name", name}, {"length", values.size()}});
        for (double v : values) binary::put_f64(payload_, v);
    }
    nlohmann::json manifest() const { return blocks_; }
    const std::vector<std::uint8_t>& payload() const { return payload_; }

private:
    nlohmann::json blocks_ = nlohmann::json::array();
    std::vector<std::uint8_t> payload_;
};

class BlockReader {
public:
    BlockReader(binary::Reader& in, const nlohmann::json& blocks) : in_(in), blocks_(blocks) {}

    void read(const std::string& name, std::span<double> out) {
        if (next_ >= blocks_.size()) throw ShapeError("checkpoint is missing block '" + name + "'");
        const auto& b = blocks_.at(next_++);
        if (b.at("name").get<std::string>() != name)
            throw ShapeError("checkpoint block '" + b.at("name").get<std::string>() + "' found where '" + name +
                             "' was expected");
        if (b.at("length").get<std::size_t>() != out.size())
            throw ShapeError("checkpoint block '" + name + "' has length " +
                             std::to_string(b.at("length").get<std::size_t>()) + ", expected " +
                             std::to_string(out.size()));
        in_.require(8 * out.size());
        for (double& v : out) v = in_.f64();
    }

    std::vector<double> read_vector(const std::string& name) {
        if (next_ >= blocks_.size()) throw ShapeError("checkpoint is missing block '" + name + "'");
        std::vector<double> v(blocks_.at(next_).at("length").get<std::size_t>());
        read(name, v);
        return v;
    }

    bool done() const { return next_ == blocks_.size(); }

private:
    binary::Reader& in_;
    const nlohmann::json& blocks_;
    std::size_t next_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const AgentState& a) {
    BlockWriter w;
    w.add("policy", a.policy.net().params());
    for (std::size_t m = 0; m < a.critic.num_heads(); ++m) w.add("critic.online." + std::to_string(m), a.critic.head(QSet::online, m).params());
    for (std::size_t m = 0; m < a.critic.num_heads(); ++m) w.add("critic.target." + std::to_string(m), a.critic.head(QSet::target, m).params());
    const auto& dyn = a.dynamics;
    w.add("dynamics.input_mean", dyn.input_mean());
    w.add("dynamics.input_std", dyn.input_std());
    w.add("dynamics.target_mean", dyn.target_mean());
    w.add("dynamics.target_std", dyn.target_std());
    for (std::size_t i = 0; i < dyn.num_members(); ++i) w.add("dynamics.member." + std::to_string(i), dyn.members()[i].params());
    w.add("actor_opt.m", a.actor_opt.first_moment);
    w.add("actor_opt.v", a.actor_opt.second_moment);
    for (std::size_t m = 0; m < a.critic_opt.size(); ++m) {
        w.add("critic_opt." + std::to_string(m) + ".m", a.critic_opt[m].first_moment);
        w.add("critic_opt." + std::to_string(m) + ".v", a.critic_opt[m].second_moment);
    }

    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : a.log) metrics.push_back(to_json(m));
    nlohmann::json critic_opt = nlohmann::json::array();
    for (const auto& s : a.critic_opt) critic_opt.push_back(adam_json(s));
    nlohmann::json dynamics = {{"obs_dim", dyn.obs_dim()},
                               {"act_dim", dyn.act_dim()},
                               {"logvar_min", dyn.logvar_min()},
                               {"logvar_max", dyn.logvar_max()},
                               {"elites", dyn.elite_indices()},
                               {"members", nlohmann::json::array()}};
    for (const auto& net : dyn.members()) dynamics["members"].push_back(net_json(net));
    nlohmann::json critic_heads = nlohmann::json::array();
    for (std::size_t m = 0; m < a.critic.num_heads(); ++m) critic_heads.push_back(net_json(a.critic.head(QSet::online, m)));

    const nlohmann::json manifest = {
        {"env_id", a.env_id},
        {"epoch", a.epoch},
        {"config", to_json(a.config)},
        {"metrics", metrics},
        {"policy",
         {{"net", net_json(a.policy.net())},
          {"low", a.policy.action_low()},
          {"high", a.policy.action_high()},
          {"temperature", a.policy.entropy_temperature()}}},
        {"critic",
         {{"obs_dim", a.critic.obs_dim()}, {"rate", a.critic.target_update_rate()}, {"heads", critic_heads}}},
        {"dynamics", dynamics},
        {"actor_opt", adam_json(a.actor_opt)},
        {"critic_opt", critic_opt},
        {"blocks", w.manifest()}};

    const std::string text = manifest.dump();
    std::vector<std::uint8_t> out;
    binary::put_bytes(out, std::string_view(checkpoint_magic, 4));
    binary::put_u32(out, checkpoint_format_version);
    binary::put_u64(out, text.size());
    binary::put_bytes(out, text);
    out.insert(out.end(), w.payload().begin(), w.payload().end());
    return out;
}

AgentState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    binary::Reader in(bytes, "checkpoint");
    if (bytes.size() < 4 || std::memcmp(bytes.data(), checkpoint_magic, 4) != 0)
        throw MagicMismatchError("not a checkpoint file: magic bytes are not \"CBPC\"");
    in.bytes(4);
    const std::uint32_t version = in.u32();
    if (version != checkpoint_format_version)
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    const std::string text = in.bytes(in.u64());

    AgentState a;
    try {
        const auto j = nlohmann::json::parse(text);
        j.at("env_id").get_to(a.env_id);
        j.at("epoch").get_to(a.epoch);
        a.config = train_config_from_json(j.at("config"));
        for (const auto& m : j.at("metrics")) a.log.push_back(epoch_metrics_from_json(m));

        const auto& pj = j.at("policy");
        a.policy = PolicyNet::from_parts(net_from_json(pj.at("net")), pj.at("low").get<std::vector<double>>(),
                                         pj.at("high").get<std::vector<double>>(), pj.at("temperature").get<double>());
        const auto& cj = j.at("critic");
        std::vector<DenseNet> heads;
        for (const auto& h : cj.at("heads")) heads.push_back(net_from_json(h));
        a.critic = QEnsemble::from_heads(std::move(heads), cj.at("obs_dim").get<std::size_t>(), cj.at("rate").get<double>());

        const auto& dj = j.at("dynamics");
        const std::size_t obs = dj.at("obs_dim").get<std::size_t>(), act = dj.at("act_dim").get<std::size_t>();
        a.actor_opt = adam_from_json(j.at("actor_opt"));
        for (const auto& s : j.at("critic_opt")) a.critic_opt.push_back(adam_from_json(s));

        BlockReader blocks(in, j.at("blocks"));
        blocks.read("policy", a.policy.net().params());
        for (std::size_t m = 0; m < a.critic.num_heads(); ++m)
            blocks.read("critic.online." + std::to_string(m), a.critic.head(QSet::online, m).params());
        for (std::size_t m = 0; m < a.critic.num_heads(); ++m)
            blocks.read("critic.target." + std::to_string(m), a.critic.head(QSet::target, m).params());
        const auto in_mean = blocks.read_vector("dynamics.input_mean");
        const auto in_std = blocks.read_vector("dynamics.input_std");
        const auto out_mean = blocks.read_vector("dynamics.target_mean");
        const auto out_std = blocks.read_vector("dynamics.target_std");
        if (in_mean.size() != obs + act || in_std.size() != obs + act || out_mean.size() != obs + 1 ||
            out_std.size() != obs + 1)
            throw ShapeError("dynamics normalization blocks do not match the declared dims");
        NormStats stats;
        stats.obs_mean.assign(in_mean.begin(), in_mean.begin() + static_cast<std::ptrdiff_t>(obs));
        stats.act_mean.assign(in_mean.begin() + static_cast<std::ptrdiff_t>(obs), in_mean.end());
        stats.obs_std.assign(in_std.begin(), in_std.begin() + static_cast<std::ptrdiff_t>(obs));
        stats.act_std.assign(in_std.begin() + static_cast<std::ptrdiff_t>(obs), in_std.end());
        stats.delta_mean.assign(out_mean.begin(), out_mean.begin() + static_cast<std::ptrdiff_t>(obs));
        stats.delta_std.assign(out_std.begin(), out_std.begin() + static_cast<std::ptrdiff_t>(obs));
        stats.reward_mean = out_mean[obs];
        stats.reward_std = out_std[obs];
        a.dynamics = DynamicsEnsemble(obs, act, stats, dj.at("logvar_min").get<double>(), dj.at("logvar_max").get<double>());
        std::size_t i = 0;
        for (const auto& mj : dj.at("members")) {
            DenseNet net = net_from_json(mj);
            blocks.read("dynamics.member." + std::to_string(i++), net.params());
            a.dynamics.add_member(std::move(net));
        }
        a.dynamics.set_elites(dj.at("elites").get<std::vector<std::size_t>>());
        blocks.read("actor_opt.m", a.actor_opt.first_moment);
        blocks.read("actor_opt.v", a.actor_opt.second_moment);
        for (std::size_t m = 0; m < a.critic_opt.size(); ++m) {
            blocks.read("critic_opt." + std::to_string(m) + ".m", a.critic_opt[m].first_moment);
            blocks.read("critic_opt." + std::to_string(m) + ".v", a.critic_opt[m].second_moment);
        }
        if (!blocks.done()) throw ShapeError("checkpoint declares unread parameter blocks");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint manifest: ") + e.what(), "bad-header");
    }
    if (in.remaining() != 0)
        throw IoError("checkpoint has " + std::to_string(in.remaining()) + " trailing bytes", "trailing-bytes");
    if (a.policy.obs_dim() != a.critic.obs_dim() || a.policy.act_dim() != a.critic.act_dim())
        throw ShapeError("checkpoint policy and critic dimensions disagree");
    return a;
}

void save_checkpoint(const AgentState& agent, const std::string& path) {
    binary::write_file(path, encode_checkpoint(agent));
}

AgentState load_checkpoint(const std::string& path) { return decode_checkpoint(binary::read_file(path)); }

}  // namespace cbop
