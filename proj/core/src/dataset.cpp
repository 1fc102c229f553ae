#include "cbop/dataset.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "cbop/binary_io.hpp"
#include "cbop/errors.hpp"

namespace cbop {

namespace {

constexpr char dataset_magic[4] = {'C', 'B', 'O', 'P'};

void column_stats(const std::vector<double>& values, std::size_t dim, std::vector<double>& mean,
                  std::vector<double>& stdev) {
    mean.assign(dim, 0.0);
    stdev.assign(dim, 0.0);
    const std::size_t n = dim == 0 ? 0 : values.size() / dim;
    if (n == 0) return;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += values[i * dim + j];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = values[i * dim + j] - mean[j];
            stdev[j] += d * d;
        }
    for (auto& s : stdev) s = std::sqrt(s / static_cast<double>(n));
}

nlohmann::json stats_to_json(const NormStats& s) {
    return {{"obs_mean", s.obs_mean},     {"obs_std", s.obs_std},         {"act_mean", s.act_mean},
            {"act_std", s.act_std},       {"delta_mean", s.delta_mean},   {"delta_std", s.delta_std},
            {"reward_mean", s.reward_mean}, {"reward_std", s.reward_std}};
}

NormStats stats_from_json(const nlohmann::json& j) {
    NormStats s;
    j.at("obs_mean").get_to(s.obs_mean);
    j.at("obs_std").get_to(s.obs_std);
    j.at("act_mean").get_to(s.act_mean);
    j.at("act_std").get_to(s.act_std);
    j.at("delta_mean").get_to(s.delta_mean);
    j.at("delta_std").get_to(s.delta_std);
    j.at("reward_mean").get_to(s.reward_mean);
    j.at("reward_std").get_to(s.reward_std);
    return s;
}

std::vector<double> noisy(const Environment& env, std::vector<double> action, double noise_scale, Rng& rng) {
    const auto lo = env.action_low(), hi = env.action_high();
    for (std::size_t j = 0; j < action.size(); ++j) action[j] += noise_scale * 0.5 * (hi[j] - lo[j]) * standard_normal(rng);
    return env.clamp_action(action);
}

enum class Quality { random, medium, noisy_medium, expert };

std::vector<double> behavior_action(const Environment& env, Quality q, std::span<const double> obs,
                                    double noise_scale, Rng& rng) {
    switch (q) {
        case Quality::random: return env.random_action(rng);
        case Quality::medium: return noisy(env, env.medium_action(obs), noise_scale, rng);
        case Quality::noisy_medium: return noisy(env, env.medium_action(obs), 3.0 * noise_scale, rng);
        case Quality::expert: return noisy(env, env.expert_action(obs), noise_scale, rng);
    }
    return env.random_action(rng);
}

void roll_segment(const Environment& env, Quality q, std::size_t count, double noise_scale, Rng& rng,
                  Dataset& out) {
    const std::size_t target = out.size() + count;
    while (out.size() < target) {
        std::vector<double> s = env.initial_state(rng);
        for (std::size_t t = 0; t < env.max_episode_steps() && out.size() < target; ++t) {
            auto a = behavior_action(env, q, s, noise_scale, rng);
            auto step = env.step(s, a);
            out.push_back(Transition{s, a, step.reward, step.next_obs, step.terminated}, t == 0);
            if (step.terminated) break;
            s = std::move(step.next_obs);
        }
    }
}

}  // namespace

std::string to_string(BehaviorTag tag) {
    switch (tag) {
        case BehaviorTag::random: return "random";
        case BehaviorTag::medium: return "medium";
        case BehaviorTag::medium_replay: return "medium_replay";
        case BehaviorTag::expert: return "expert";
        case BehaviorTag::mixed: return "mixed";
    }
    return "random";
}

BehaviorTag behavior_tag_from_string(const std::string& name) {
    if (name == "random") return BehaviorTag::random;
    if (name == "medium") return BehaviorTag::medium;
    if (name == "medium_replay" || name == "medium-replay") return BehaviorTag::medium_replay;
    if (name == "expert") return BehaviorTag::expert;
    if (name == "mixed") return BehaviorTag::mixed;
    throw ConfigError("unknown behavior tag '" + name + "'");
}

Transition Dataset::transition(std::size_t i) const {
    Transition t;
    const auto o = obs_row(i), a = action_row(i), n = next_obs_row(i);
    t.obs.assign(o.begin(), o.end());
    t.action.assign(a.begin(), a.end());
    t.reward = rewards[i];
    t.next_obs.assign(n.begin(), n.end());
    t.done = done[i] != 0;
    return t;
}

void Dataset::push_back(const Transition& t, bool is_initial) {
    if (t.obs.size() != obs_dim || t.next_obs.size() != obs_dim || t.action.size() != act_dim)
        throw ShapeError("transition dims do not match the dataset", "input-shape");
    for (double v : t.obs) obs.push_back(static_cast<float>(v));
    for (double v : t.action) actions.push_back(static_cast<float>(v));
    rewards.push_back(static_cast<float>(t.reward));
    for (double v : t.next_obs) next_obs.push_back(static_cast<float>(v));
    done.push_back(t.done ? 1 : 0);
    initial.push_back(is_initial ? 1 : 0);
}

std::ptrdiff_t Dataset::successor(std::size_t i) const {
    if (done[i]) return -1;
    if (i + 1 < size() && !initial[i + 1]) return static_cast<std::ptrdiff_t>(i + 1);
    return -1;
}

std::vector<double> Dataset::discounted_returns(double gamma) const {
    std::vector<double> g(size(), 0.0);
    for (std::size_t i = size(); i-- > 0;) {
        const auto next = successor(i);
        g[i] = rewards[i] + (next >= 0 ? gamma * g[static_cast<std::size_t>(next)] : 0.0);
    }
    return g;
}

std::vector<std::size_t> Dataset::initial_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
        if (initial[i]) idx.push_back(i);
    return idx;
}

NormStats compute_stats(const Dataset& data) {
    NormStats s;
    std::vector<double> o(data.obs.begin(), data.obs.end());
    std::vector<double> a(data.actions.begin(), data.actions.end());
    std::vector<double> d(data.obs.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = static_cast<double>(data.next_obs[i]) - static_cast<double>(data.obs[i]);
    std::vector<double> r(data.rewards.begin(), data.rewards.end());
    column_stats(o, data.obs_dim, s.obs_mean, s.obs_std);
    column_stats(a, data.act_dim, s.act_mean, s.act_std);
    column_stats(d, data.obs_dim, s.delta_mean, s.delta_std);
    std::vector<double> rm, rs;
    column_stats(r, 1, rm, rs);
    s.reward_mean = rm[0];
    s.reward_std = rs[0];
    return s;
}

void validate(const Dataset& data) {
    const std::size_t n = data.size();
    if (data.obs_dim == 0 || data.act_dim == 0) throw ShapeError("dataset dims must be positive");
    if (data.obs.size() != n * data.obs_dim || data.next_obs.size() != n * data.obs_dim ||
        data.actions.size() != n * data.act_dim || data.done.size() != n || data.initial.size() != n)
        throw ShapeError("dataset columns have inconsistent lengths");
}

Dataset generate_dataset(const Environment& env, BehaviorTag tag, std::size_t size, double noise_scale,
                         std::uint64_t seed) {
    if (size == 0) throw ConfigError("dataset size must be at least 1");
    Dataset data;
    data.env_id = env.id();
    data.obs_dim = env.obs_dim();
    data.act_dim = env.act_dim();
    data.tag = tag;
    data.seed = seed;
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(tag)});
    switch (tag) {
        case BehaviorTag::random: roll_segment(env, Quality::random, size, noise_scale, rng, data); break;
        case BehaviorTag::medium: roll_segment(env, Quality::medium, size, noise_scale, rng, data); break;
        case BehaviorTag::expert: roll_segment(env, Quality::expert, size, noise_scale, rng, data); break;
        case BehaviorTag::medium_replay: {
            const std::size_t third = size / 3;
            roll_segment(env, Quality::random, third, noise_scale, rng, data);
            roll_segment(env, Quality::noisy_medium, third, noise_scale, rng, data);
            roll_segment(env, Quality::medium, size - 2 * third, noise_scale, rng, data);
            break;
        }
        case BehaviorTag::mixed: {
            const std::size_t half = size / 2;
            roll_segment(env, Quality::medium, half, noise_scale, rng, data);
            roll_segment(env, Quality::expert, size - half, noise_scale, rng, data);
            break;
        }
    }
    data.stats = compute_stats(data);
    return data;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
    validate(data);
    nlohmann::json header = {{"env_id", data.env_id},
                             {"obs_dim", data.obs_dim},
                             {"act_dim", data.act_dim},
                             {"count", data.size()},
                             {"tag", to_string(data.tag)},
                             {"seed", data.seed},
                             {"stats", stats_to_json(data.stats)}};
    const std::string text = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(16 + text.size() + 4 * (data.obs.size() * 2 + data.actions.size() + data.size()) + 2 * data.size());
    binary::put_bytes(out, std::string_view(dataset_magic, 4));
    binary::put_u32(out, dataset_format_version);
    binary::put_u64(out, text.size());
    binary::put_bytes(out, text);
    for (float v : data.obs) binary::put_f32(out, v);
    for (float v : data.actions) binary::put_f32(out, v);
    for (float v : data.rewards) binary::put_f32(out, v);
    for (float v : data.next_obs) binary::put_f32(out, v);
    out.insert(out.end(), data.done.begin(), data.done.end());
    out.insert(out.end(), data.initial.begin(), data.initial.end());
    return out;
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    binary::Reader in(bytes, "dataset");
    if (bytes.size() < 4 || std::memcmp(bytes.data(), dataset_magic, 4) != 0)
        throw MagicMismatchError("not a dataset file: magic bytes are not \"CBOP\"");
    in.bytes(4);
    const std::uint32_t version = in.u32();
    if (version != dataset_format_version)
        throw VersionError("unsupported dataset version " + std::to_string(version));
    const std::uint64_t header_len = in.u64();
    const std::string text = in.bytes(header_len);

    Dataset data;
    std::size_t n = 0;
    try {
        const auto header = nlohmann::json::parse(text);
        header.at("env_id").get_to(data.env_id);
        header.at("obs_dim").get_to(data.obs_dim);
        header.at("act_dim").get_to(data.act_dim);
        header.at("count").get_to(n);
        data.tag = behavior_tag_from_string(header.at("tag").get<std::string>());
        header.at("seed").get_to(data.seed);
        data.stats = stats_from_json(header.at("stats"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed dataset header: ") + e.what(), "bad-header");
    }

    const std::size_t payload = 4 * (2 * n * data.obs_dim + n * data.act_dim + n) + 2 * n;
    in.require(payload);
    auto read_floats = [&](std::vector<float>& col, std::size_t count) {
        col.resize(count);
        for (auto& v : col) v = in.f32();
    };
    read_floats(data.obs, n * data.obs_dim);
    read_floats(data.actions, n * data.act_dim);
    read_floats(data.rewards, n);
    read_floats(data.next_obs, n * data.obs_dim);
    data.done.resize(n);
    for (auto& v : data.done) v = in.u8();
    data.initial.resize(n);
    for (auto& v : data.initial) v = in.u8();
    if (in.remaining() != 0)
        throw IoError("dataset has " + std::to_string(in.remaining()) + " trailing bytes", "trailing-bytes");
    return data;
}

void save_dataset(const Dataset& data, const std::string& path) { binary::write_file(path, encode_dataset(data)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(binary::read_file(path)); }

double behavior_policy_return(const Environment& env, BehaviorTag tag, double noise_scale, std::size_t episodes,
                              std::uint64_t seed) {
    Quality q = Quality::random;
    if (tag == BehaviorTag::medium) q = Quality::medium;
    else if (tag == BehaviorTag::expert) q = Quality::expert;
    else if (tag != BehaviorTag::random) throw ConfigError("behavior_policy_return supports random, medium, expert");
    Rng rng = make_rng(seed, {0xbe4a, static_cast<std::uint64_t>(tag)});
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        std::vector<double> s = env.initial_state(rng);
        for (std::size_t t = 0; t < env.max_episode_steps(); ++t) {
            auto step = env.step(s, behavior_action(env, q, s, noise_scale, rng));
            total += step.reward;
            if (step.terminated) break;
            s = std::move(step.next_obs);
        }
    }
    return total / static_cast<double>(episodes);
}

}  // namespace cbop
