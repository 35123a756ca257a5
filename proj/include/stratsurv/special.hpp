#ifndef STRATSURV_SPECIAL_HPP
#define STRATSURV_SPECIAL_HPP

#include <span>
#include <vector>

namespace stratsurv {

// log(sum_i exp(v[i])) without overflow; -inf entries are absorbed,
// all-(-inf) input yields -inf.
double log_sum_exp(std::span<const double> values);

// ln Gamma(a), a > 0. Lanczos approximation, ~1e-14 relative.
double log_gamma(double a);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
// a > 0, x >= 0. Series for x < a + 1, continued fraction otherwise.
double reg_lower_inc_gamma(double a, double x);

// log P(a, x), stable when P underflows (small x, large a).
double log_reg_lower_inc_gamma(double a, double x);

// Unregularized gamma(a, x) = P(a, x) * Gamma(a).
double lower_inc_gamma(double a, double x);

// Uniform grid of k subintervals (k + 1 nodes) on [0, t_end].
struct QuadratureGrid {
  double t_end = 0.0;
  int k = 0;
  std::vector<double> nodes;

  QuadratureGrid(double t_end, int k);
};

// (t/K) * sum_{k=1..K} (v[k-1] + v[k]) / 2
double trapezoid(std::span<const double> values, const QuadratureGrid& grid);

// Composite Simpson; grid.k must be even. Exact for cubics.
double simpson(std::span<const double> values, const QuadratureGrid& grid);

}  // namespace stratsurv

#endif
