#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbop::testkit {

GridMoments gaussian_product_by_quadrature(std::span<const double> mu, std::span<const double> var,
                                           std::size_t points) {
    // Bracket the product density by the sharpest factor, widened generously.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, min_sd = lo;
    for (std::size_t h = 0; h < mu.size(); ++h) {
        lo = std::min(lo, mu[h]);
        hi = std::max(hi, mu[h]);
        min_sd = std::min(min_sd, std::sqrt(var[h]));
    }
    lo -= 12.0 * min_sd;
    hi += 12.0 * min_sd;
    const double dx = (hi - lo) / static_cast<double>(points - 1);
    std::vector<double> logp(points);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + dx * static_cast<double>(i);
        double s = 0.0;
        for (std::size_t h = 0; h < mu.size(); ++h) s -= 0.5 * (x - mu[h]) * (x - mu[h]) / var[h];
        logp[i] = s;
        peak = std::max(peak, s);
    }
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + dx * static_cast<double>(i);
        const double w = std::exp(logp[i] - peak) * ((i == 0 || i + 1 == points) ? 0.5 : 1.0);
        z += w;
        m1 += w * x;
    }
    const double mean = m1 / z;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + dx * static_cast<double>(i);
        const double w = std::exp(logp[i] - peak) * ((i == 0 || i + 1 == points) ? 0.5 : 1.0);
        m2 += w * (x - mean) * (x - mean);
    }
    return {mean, m2 / z};
}

std::vector<double> central_difference(std::span<double> params, const std::function<double()>& f, double step) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double up = f();
        params[i] = keep - step;
        const double down = f();
        params[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

double population_variance(std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size());
}

std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        if (a[piv * n + c] == 0.0) throw std::runtime_error("singular system");
        for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
        x[i] = s / a[i * n + i];
    }
    return x;
}

}  // namespace cbop::testkit
