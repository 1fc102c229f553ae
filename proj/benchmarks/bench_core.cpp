#include <benchmark/benchmark.h>

#include <vector>

#include "cbop/bayes_mve.hpp"
#include "cbop/dataset.hpp"
#include "cbop/dense_net.hpp"
#include "cbop/dynamics.hpp"
#include "cbop/env.hpp"
#include "cbop/policy.hpp"
#include "cbop/q_ensemble.hpp"
#include "cbop/rng.hpp"

namespace {

using namespace cbop;

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = uniform(rng, -1.0, 1.0);
    return m;
}

void bm_net_forward(benchmark::State& state) {
    Rng rng = make_rng(1);
    const auto width = static_cast<std::size_t>(state.range(0));
    const DenseNet net({6, width, width, 1}, Activation::relu, Activation::identity, rng);
    const Matrix x = random_batch(256, 6, rng);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(bm_net_forward)->Arg(64)->Arg(256);

void bm_net_backward(benchmark::State& state) {
    Rng rng = make_rng(2);
    const auto width = static_cast<std::size_t>(state.range(0));
    const DenseNet net({6, width, width, 1}, Activation::relu, Activation::identity, rng);
    const Matrix x = random_batch(256, 6, rng);
    const Matrix up(256, 1, 1.0);
    for (auto _ : state) {
        DenseNet::Cache cache;
        net.forward(x, cache);
        benchmark::DoNotOptimize(net.backward(cache, up));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(bm_net_backward)->Arg(64)->Arg(256);

struct RolloutFixture {
    std::unique_ptr<Environment> env = make_env("PointMass2D");
    Dataset data = generate_dataset(*env, BehaviorTag::random, 2000, 0.2, 3);
    DynamicsEnsemble dynamics;
    PolicyNet policy;
    QEnsemble critic;

    RolloutFixture() {
        DynamicsConfig dc;
        dc.num_members = 7;
        dc.num_elites = 5;
        dc.hidden = {64, 64};
        dc.max_epochs = 1;
        dynamics = train_dynamics(data, dc);
        Rng rng = make_rng(4);
        policy = PolicyNet(4, env->action_low(), env->action_high(), {64, 64}, Activation::relu, 0.05, rng);
        critic = QEnsemble(4, 2, 5, {64, 64}, Activation::relu, 0.005, rng);
    }
};

void bm_sample_returns(benchmark::State& state) {
    static const RolloutFixture f;
    RolloutConfig rc;
    rc.horizon = static_cast<std::size_t>(state.range(0));
    rc.mode = state.range(1) == 0 ? SamplingMode::single_pass : SamplingMode::independent_per_h;
    const Transition t = f.data.transition(17);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_returns(t, f.policy, f.dynamics, f.critic, rc, ++seed));
}
BENCHMARK(bm_sample_returns)->Args({5, 0})->Args({10, 0})->Args({10, 1});

void bm_posterior(benchmark::State& state) {
    Rng rng = make_rng(5);
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> mu(n), var(n);
    for (std::size_t h = 0; h < n; ++h) {
        mu[h] = uniform(rng, -5.0, 5.0);
        var[h] = uniform(rng, 0.1, 4.0);
    }
    const auto params = likelihood_from_moments(mu, var);
    for (auto _ : state) benchmark::DoNotOptimize(posterior(params));
}
BENCHMARK(bm_posterior)->Arg(6)->Arg(11);

}  // namespace

BENCHMARK_MAIN();
