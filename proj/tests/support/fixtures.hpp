#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbop/dataset.hpp"
#include "cbop/dense_net.hpp"
#include "cbop/dynamics.hpp"
#include "cbop/policy.hpp"
#include "cbop/q_ensemble.hpp"

namespace cbop::testkit {

/// s' = 0.9 s + 0.1 a, r = -s^2 on a 1-d state, actions uniform in [-1, 1].
Dataset linear_system_dataset(std::size_t size, std::uint64_t seed);

/// Every row is the 1-d state 0 looping to itself with `reward`.
Dataset self_loop_dataset(std::size_t size, double reward);

/// Alternating 1-d states 0 -> 1 -> 0 ...; reward r0 when leaving state 0, r1 when leaving state 1.
Dataset two_state_chain(std::size_t size, double r0, double r1);

/// Q ensemble with one affine head initialised to zero and target rate 1.
QEnsemble single_affine_critic();

/// Zero-mean, unit-std statistics so normalization is the identity.
NormStats identity_stats(std::size_t obs_dim, std::size_t act_dim);

/// Single-member, single-elite dynamics whose mean is s' = a_s s + b_a a, r = c_s s + c_a a
/// (1-d state and action, identity normalization, minimal variance).
DynamicsEnsemble linear_dynamics(double a_s, double b_a, double c_s, double c_a);

/// Policy on a 1-d state with action box [-1, 1] and deterministic action tanh(w s + b).
PolicyNet linear_tanh_policy(double w, double b);

/// Scalar affine critic head Q(s, a) = ws s + wa a + b on 1-d state/action.
DenseNet affine_q_head(double ws, double wa, double b);

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace cbop::testkit
