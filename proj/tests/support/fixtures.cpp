#include "fixtures.hpp"

#include <atomic>
#include <chrono>

#include "cbop/rng.hpp"

namespace cbop::testkit {

Dataset linear_system_dataset(std::size_t size, std::uint64_t seed) {
    Dataset d;
    d.env_id = "linear";
    d.obs_dim = 1;
    d.act_dim = 1;
    d.seed = seed;
    Rng rng = make_rng(seed);
    double s = uniform(rng, -1.0, 1.0);
    for (std::size_t i = 0; i < size; ++i) {
        const bool initial = i % 50 == 0;
        if (initial) s = uniform(rng, -1.0, 1.0);
        const double a = uniform(rng, -1.0, 1.0);
        Transition t;
        t.obs = {s};
        t.action = {a};
        t.reward = -s * s;
        t.next_obs = {0.9 * s + 0.1 * a};
        d.push_back(t, initial);
        s = static_cast<double>(static_cast<float>(t.next_obs[0]));
    }
    d.stats = compute_stats(d);
    return d;
}

Dataset self_loop_dataset(std::size_t size, double reward) {
    Dataset d;
    d.env_id = "self-loop";
    d.obs_dim = 1;
    d.act_dim = 1;
    for (std::size_t i = 0; i < size; ++i) d.push_back({{0.0}, {0.0}, reward, {0.0}, false}, i == 0);
    d.stats = compute_stats(d);
    return d;
}

Dataset two_state_chain(std::size_t size, double r0, double r1) {
    Dataset d;
    d.env_id = "chain";
    d.obs_dim = 1;
    d.act_dim = 1;
    for (std::size_t i = 0; i < size; ++i) {
        const double s = static_cast<double>(i % 2);
        d.push_back({{s}, {0.0}, s == 0.0 ? r0 : r1, {1.0 - s}, false}, i == 0);
    }
    d.stats = compute_stats(d);
    return d;
}

QEnsemble single_affine_critic() { return QEnsemble::from_heads({affine_q_head(0.0, 0.0, 0.0)}, 1, 1.0); }

NormStats identity_stats(std::size_t obs_dim, std::size_t act_dim) {
    NormStats s;
    s.obs_mean.assign(obs_dim, 0.0);
    s.obs_std.assign(obs_dim, 1.0);
    s.act_mean.assign(act_dim, 0.0);
    s.act_std.assign(act_dim, 1.0);
    s.delta_mean.assign(obs_dim, 0.0);
    s.delta_std.assign(obs_dim, 1.0);
    s.reward_mean = 0.0;
    s.reward_std = 1.0;
    return s;
}

DynamicsEnsemble linear_dynamics(double a_s, double b_a, double c_s, double c_a) {
    DynamicsEnsemble ens(1, 1, identity_stats(1, 1), -10.0, 0.5);
    // Outputs: (delta mean, reward mean, delta raw logvar, reward raw logvar).
    DenseNet net = DenseNet::zeros({2, 4}, Activation::identity, Activation::identity);
    net.weight(0, 0, 0) = a_s - 1.0;
    net.weight(0, 1, 0) = b_a;
    net.weight(0, 0, 1) = c_s;
    net.weight(0, 1, 1) = c_a;
    net.bias(0, 2) = -100.0;
    net.bias(0, 3) = -100.0;
    ens.add_member(std::move(net));
    ens.set_elites({0});
    return ens;
}

PolicyNet linear_tanh_policy(double w, double b) {
    DenseNet net = DenseNet::zeros({1, 2}, Activation::identity, Activation::identity);
    net.weight(0, 0, 0) = w;
    net.bias(0, 0) = b;
    net.bias(0, 1) = -1.0;
    return PolicyNet::from_parts(std::move(net), {-1.0}, {1.0}, 0.05);
}

DenseNet affine_q_head(double ws, double wa, double b) {
    DenseNet net = DenseNet::zeros({2, 1}, Activation::identity, Activation::identity);
    net.weight(0, 0, 0) = ws;
    net.weight(0, 1, 0) = wa;
    net.bias(0, 0) = b;
    return net;
}

TempDir::TempDir(const std::string& prefix) {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace cbop::testkit
