#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cbop::testkit {

/// Mean and variance of the normalized product of Gaussian densities
/// N(x; mu_h, var_h), by trapezoidal quadrature on a dense grid.
struct GridMoments {
    double mean = 0.0;
    double var = 0.0;
};
GridMoments gaussian_product_by_quadrature(std::span<const double> mu, std::span<const double> var,
                                           std::size_t points = 40001);

/// Central finite-difference gradient of f with respect to params (restored afterwards).
std::vector<double> central_difference(std::span<double> params, const std::function<double()>& f, double step);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor);

/// Population variance of a flat sample.
double population_variance(std::span<const double> x);

/// Solves A x = b (row-major n x n) by Gaussian elimination with partial pivoting.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b);

}  // namespace cbop::testkit
