#include "cbop/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cbop/adam.hpp"
#include "cbop/errors.hpp"

namespace cbop {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Normalized {
    Matrix inputs;
    Matrix targets;
};

Normalized normalize_rows(const DynamicsEnsemble& ens, const Dataset& data) {
    Normalized out{Matrix(data.size(), ens.input_dim()), Matrix(data.size(), ens.target_dim())};
    std::vector<double> s(data.obs_dim), a(data.act_dim), d(data.obs_dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto o = data.obs_row(i), act = data.action_row(i), n = data.next_obs_row(i);
        for (std::size_t j = 0; j < data.obs_dim; ++j) {
            s[j] = o[j];
            d[j] = static_cast<double>(n[j]) - static_cast<double>(o[j]);
        }
        for (std::size_t j = 0; j < data.act_dim; ++j) a[j] = act[j];
        const auto x = ens.normalize_input(s, a);
        const auto y = ens.normalize_target(d, data.rewards[i]);
        std::copy(x.begin(), x.end(), out.inputs.row(i).begin());
        std::copy(y.begin(), y.end(), out.targets.row(i).begin());
    }
    return out;
}

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
    return out;
}

// Mean Gaussian NLL per target dimension; fills `upstream` with d loss / d output when given.
double gaussian_nll(const Matrix& output, const Matrix& targets, double lo, double hi, Matrix* upstream) {
    const std::size_t d = targets.cols();
    const double scale = 1.0 / static_cast<double>(targets.rows() * d);
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double total = 0.0;
    if (upstream) *upstream = Matrix(output.rows(), output.cols());
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            double dlv_draw = 0.0;
            const double lv = bound_logvar(output(r, d + j), lo, hi, &dlv_draw);
            const double err = targets(r, j) - output(r, j);
            const double inv_var = std::exp(-lv);
            total += 0.5 * (err * err * inv_var + lv + log2pi);
            if (upstream) {
                (*upstream)(r, j) = -err * inv_var * scale;
                (*upstream)(r, d + j) = 0.5 * (1.0 - err * err * inv_var) * dlv_draw * scale;
            }
        }
    }
    return total * scale;
}

}  // namespace

double bound_logvar(double raw, double lo, double hi, double* dlv_draw) {
    const double upper = hi - softplus(hi - raw);
    const double lv = lo + softplus(upper - lo);
    if (dlv_draw) *dlv_draw = sigmoid(hi - raw) * sigmoid(upper - lo);
    return lv;
}

DynamicsEnsemble::DynamicsEnsemble(std::size_t obs_dim, std::size_t act_dim, const NormStats& stats,
                                   double logvar_min, double logvar_max)
    : obs_dim_(obs_dim), act_dim_(act_dim), logvar_min_(logvar_min), logvar_max_(logvar_max) {
    if (stats.obs_mean.size() != obs_dim || stats.act_mean.size() != act_dim || stats.delta_mean.size() != obs_dim)
        throw ShapeError("normalization stats do not match the dynamics dims");
    auto clamp_std = [](double s) { return std::max(s, min_norm_std); };
    in_mean_ = stats.obs_mean;
    in_mean_.insert(in_mean_.end(), stats.act_mean.begin(), stats.act_mean.end());
    for (double s : stats.obs_std) in_std_.push_back(clamp_std(s));
    for (double s : stats.act_std) in_std_.push_back(clamp_std(s));
    out_mean_ = stats.delta_mean;
    out_mean_.push_back(stats.reward_mean);
    for (double s : stats.delta_std) out_std_.push_back(clamp_std(s));
    out_std_.push_back(clamp_std(stats.reward_std));
}

void DynamicsEnsemble::add_member(DenseNet net) {
    if (net.input_dim() != input_dim() || net.output_dim() != 2 * target_dim())
        throw ShapeError("dynamics member has the wrong input/output width");
    members_.push_back(std::move(net));
}

void DynamicsEnsemble::set_elites(std::vector<std::size_t> elites) {
    std::vector<std::size_t> sorted = elites;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidMemberError("elite indices must be distinct");
    for (auto e : elites)
        if (e >= members_.size()) throw InvalidMemberError("elite index " + std::to_string(e) + " out of range");
    elite_indices_ = std::move(elites);
}

bool DynamicsEnsemble::is_elite(std::size_t member) const {
    return std::find(elite_indices_.begin(), elite_indices_.end(), member) != elite_indices_.end();
}

std::vector<double> DynamicsEnsemble::normalize_input(std::span<const double> obs, std::span<const double> action) const {
    if (obs.size() != obs_dim_ || action.size() != act_dim_)
        throw ShapeError("dynamics input has the wrong dimension", "input-shape");
    std::vector<double> x(input_dim());
    for (std::size_t j = 0; j < obs_dim_; ++j) x[j] = (obs[j] - in_mean_[j]) / in_std_[j];
    for (std::size_t j = 0; j < act_dim_; ++j) x[obs_dim_ + j] = (action[j] - in_mean_[obs_dim_ + j]) / in_std_[obs_dim_ + j];
    return x;
}

std::vector<double> DynamicsEnsemble::normalize_target(std::span<const double> delta, double reward) const {
    std::vector<double> y(target_dim());
    for (std::size_t j = 0; j < obs_dim_; ++j) y[j] = (delta[j] - out_mean_[j]) / out_std_[j];
    y[obs_dim_] = (reward - out_mean_[obs_dim_]) / out_std_[obs_dim_];
    return y;
}

std::vector<double> DynamicsEnsemble::denormalize_target(std::span<const double> normalized) const {
    std::vector<double> y(target_dim());
    for (std::size_t j = 0; j < target_dim(); ++j) y[j] = out_mean_[j] + out_std_[j] * normalized[j];
    return y;
}

DynamicsEnsemble::Head DynamicsEnsemble::head(std::size_t member, std::span<const double> obs,
                                              std::span<const double> action) const {
    if (member >= members_.size()) throw InvalidMemberError("member " + std::to_string(member) + " out of range");
    const auto out = members_[member].forward(normalize_input(obs, action));
    Head h;
    h.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(target_dim()));
    h.logvar.resize(target_dim());
    for (std::size_t j = 0; j < target_dim(); ++j) h.logvar[j] = bound_logvar(out[target_dim() + j], logvar_min_, logvar_max_);
    return h;
}

DynamicsEnsemble::Prediction DynamicsEnsemble::predict(std::size_t member, std::span<const double> obs,
                                                       std::span<const double> action, PredictMode mode,
                                                       Rng& rng) const {
    if (!is_elite(member)) throw InvalidMemberError("member " + std::to_string(member) + " is not an elite");
    Head h = head(member, obs, action);
    if (mode == PredictMode::sample)
        for (std::size_t j = 0; j < target_dim(); ++j) h.mean[j] += std::exp(0.5 * h.logvar[j]) * standard_normal(rng);
    const auto y = denormalize_target(h.mean);
    Prediction p;
    p.next_obs.resize(obs_dim_);
    for (std::size_t j = 0; j < obs_dim_; ++j) p.next_obs[j] = obs[j] + y[j];
    p.reward = y[obs_dim_];
    return p;
}

DynamicsEnsemble::Prediction DynamicsEnsemble::predict(std::size_t member, std::span<const double> obs,
                                                       std::span<const double> action, PredictMode mode,
                                                       std::uint64_t seed) const {
    Rng rng(seed);
    return predict(member, obs, action, mode, rng);
}

double DynamicsEnsemble::nll(std::size_t member, const Dataset& data, std::span<const std::size_t> rows) const {
    if (member >= members_.size()) throw InvalidMemberError("member " + std::to_string(member) + " out of range");
    const auto norm = normalize_rows(*this, data);
    const Matrix x = gather(norm.inputs, rows), y = gather(norm.targets, rows);
    return gaussian_nll(members_[member].forward(x), y, logvar_min_, logvar_max_, nullptr);
}

void split_rows(std::size_t n, double validation_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                std::vector<std::size_t>& validation) {
    if (n < 2) throw InsufficientDataError("dynamics training needs at least 2 transitions");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation fraction must lie in (0, 1)");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng = make_rng(seed, {0x5911});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(validation.begin(), validation.end());
    std::sort(train.begin(), train.end());
}

DenseNet train_dynamics_member(const Dataset& data, const DynamicsConfig& config, std::size_t member,
                               const DynamicsEnsemble& normalizer, std::span<const std::size_t> train_rows,
                               std::span<const std::size_t> validation_rows, double* validation_nll,
                               std::vector<double>* train_history, std::size_t* epochs_run) {
    const auto norm = normalize_rows(normalizer, data);
    const Matrix x_val = gather(norm.inputs, validation_rows), y_val = gather(norm.targets, validation_rows);

    std::vector<std::size_t> sizes{normalizer.input_dim()};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(2 * normalizer.target_dim());
    Rng init_rng = make_rng(config.seed, {0xd1, member});
    DenseNet net(sizes, config.activation, Activation::identity, init_rng);

    Rng batch_rng = make_rng(config.seed, {0xd2, member});
    std::vector<std::size_t> pool(train_rows.begin(), train_rows.end());
    if (config.full_bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, train_rows.size() - 1);
        for (auto& p : pool) p = train_rows[pick(batch_rng)];
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

    AdamState adam(net.num_params(), config.learning_rate);
    const std::size_t batch = std::min(config.batch_size, pool.size());
    const std::size_t steps = std::max<std::size_t>(1, (pool.size() + batch - 1) / batch);
    double best = gaussian_nll(net.forward(x_val), y_val, config.logvar_min, config.logvar_max, nullptr);
    std::vector<double> best_params(net.params().begin(), net.params().end());
    std::size_t since_best = 0, epoch = 0;
    std::vector<std::size_t> rows(batch);
    for (; epoch < config.max_epochs && since_best < config.patience; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            for (auto& r : rows) r = pool[pick(batch_rng)];
            const Matrix x = gather(norm.inputs, rows), y = gather(norm.targets, rows);
            DenseNet::Cache cache;
            const Matrix out = net.forward(x, cache);
            Matrix upstream;
            const double loss = gaussian_nll(out, y, config.logvar_min, config.logvar_max, &upstream);
            if (!std::isfinite(loss)) {
                std::ostringstream os;
                os << "dynamics member " << member << " produced a non-finite loss at epoch " << epoch << " step " << s;
                throw NonFiniteError(os.str());
            }
            epoch_loss += loss;
            const auto grads = net.backward(cache, upstream);
            adam_update(net.params(), grads.params, adam);
        }
        if (train_history) train_history->push_back(epoch_loss / static_cast<double>(steps));
        const double val = gaussian_nll(net.forward(x_val), y_val, config.logvar_min, config.logvar_max, nullptr);
        if (val < best - 1e-4 * std::abs(best)) {
            best = val;
            std::copy(net.params().begin(), net.params().end(), best_params.begin());
            since_best = 0;
        } else {
            ++since_best;
        }
    }
    std::copy(best_params.begin(), best_params.end(), net.params().begin());
    if (validation_nll) *validation_nll = best;
    if (epochs_run) *epochs_run = epoch;
    return net;
}

DynamicsEnsemble train_dynamics(const Dataset& data, const DynamicsConfig& config, DynamicsTrainReport* report) {
    validate(data);
    if (config.num_members == 0 || config.num_elites == 0 || config.num_elites > config.num_members)
        throw ConfigError("dynamics ensemble needs 0 < num_elites <= num_members");
    std::vector<std::size_t> train, val;
    split_rows(data.size(), config.validation_fraction, config.seed, train, val);

    DynamicsEnsemble ens(data.obs_dim, data.act_dim, compute_stats(data), config.logvar_min, config.logvar_max);
    std::vector<double> val_nll(config.num_members);
    if (report) {
        report->train_nll_history.assign(config.num_members, {});
        report->epochs_run.assign(config.num_members, 0);
    }
    for (std::size_t m = 0; m < config.num_members; ++m) {
        ens.add_member(train_dynamics_member(data, config, m, ens, train, val, &val_nll[m],
                                             report ? &report->train_nll_history[m] : nullptr,
                                             report ? &report->epochs_run[m] : nullptr));
    }
    std::vector<std::size_t> order(config.num_members);
    for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val_nll[a] < val_nll[b]; });
    order.resize(config.num_elites);
    ens.set_elites(order);
    if (report) report->validation_nll = val_nll;
    return ens;
}

}  // namespace cbop
