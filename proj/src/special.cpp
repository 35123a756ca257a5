#include "stratsurv/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stratsurv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
}  // namespace

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double m = -kInf;
  for (double v : values) m = std::max(m, v);
  if (m == -kInf) return -kInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

// Lanczos, g = 7, 9 coefficients. Valid for a >= 0.5; reflection below.
static double lanczos_log_gamma(double a) {
  static const double c[9] = {
      0.99999999999980993,      676.5203681218851,    -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,  12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  const double z = a - 1.0;
  double s = c[0];
  for (int i = 1; i < 9; ++i) s += c[i] / (z + i);
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(s);
}

double log_gamma(double a) {
  if (!(a > 0.0)) throw std::domain_error("log_gamma: a must be positive");
  if (a < 0.5) {
    // ln Gamma(a) = ln(pi / sin(pi a)) - ln Gamma(1 - a)
    return std::log(kPi / std::sin(kPi * a)) - lanczos_log_gamma(1.0 - a);
  }
  return lanczos_log_gamma(a);
}

namespace {

constexpr int kMaxIter = 2'000'000;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Series branch (x < a + 1): log P(a, x).
// P = exp(a log x - x - lgamma(a+1)) * sum_n prod_{j<=n} x/(a+j),
// accumulated as a running log-sum for stability.
double log_p_series(double a, double x) {
  double log_term = 0.0;           // log of current term relative to leading
  double log_sum = 0.0;            // log of accumulated sum, first term = 1
  const double log_x = std::log(x);
  for (int n = 1; n < kMaxIter; ++n) {
    log_term += log_x - std::log(a + n);
    if (log_term > log_sum) {
      log_sum = log_term + std::log1p(std::exp(log_sum - log_term));
    } else {
      log_sum += std::log1p(std::exp(log_term - log_sum));
    }
    if (log_term < log_sum + std::log(kEps)) {
      return a * log_x - x - log_gamma(a + 1.0) + log_sum;
    }
  }
  throw std::runtime_error("reg_lower_inc_gamma: series failed to converge");
}

// Continued-fraction branch (x >= a + 1), modified Lentz for Q(a, x).
// Returns Q = 1 - P.
double q_continued_fraction(double a, double x) {
  const double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) {
      return std::exp(a * std::log(x) - x - log_gamma(a)) * h;
    }
  }
  throw std::runtime_error(
      "reg_lower_inc_gamma: continued fraction failed to converge");
}

}  // namespace

double reg_lower_inc_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("reg_lower_inc_gamma: a must be positive");
  if (x < 0.0) throw std::domain_error("reg_lower_inc_gamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return std::exp(log_p_series(a, x));
  return 1.0 - q_continued_fraction(a, x);
}

double log_reg_lower_inc_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("reg_lower_inc_gamma: a must be positive");
  if (x < 0.0) throw std::domain_error("reg_lower_inc_gamma: x must be nonnegative");
  if (x == 0.0) return -kInf;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return log_p_series(a, x);
  return std::log1p(-q_continued_fraction(a, x));
}

double lower_inc_gamma(double a, double x) {
  return std::exp(log_reg_lower_inc_gamma(a, x) + log_gamma(a));
}

QuadratureGrid::QuadratureGrid(double t_end_, int k_) : t_end(t_end_), k(k_) {
  if (!(t_end > 0.0)) throw std::invalid_argument("QuadratureGrid: t_end must be positive");
  if (k <= 0) throw std::invalid_argument("QuadratureGrid: k must be positive");
  nodes.resize(k + 1);
  for (int i = 0; i <= k; ++i) nodes[i] = t_end * static_cast<double>(i) / k;
}

double trapezoid(std::span<const double> values, const QuadratureGrid& grid) {
  if (static_cast<int>(values.size()) != grid.k + 1)
    throw std::invalid_argument("trapezoid: values length must equal k + 1");
  double s = 0.0;
  for (int i = 1; i <= grid.k; ++i) s += 0.5 * (values[i - 1] + values[i]);
  return grid.t_end / grid.k * s;
}

double simpson(std::span<const double> values, const QuadratureGrid& grid) {
  if (static_cast<int>(values.size()) != grid.k + 1)
    throw std::invalid_argument("simpson: values length must equal k + 1");
  if (grid.k % 2 != 0) throw std::invalid_argument("simpson: k must be even");
  const double h = grid.t_end / grid.k;
  double s = values[0] + values[grid.k];
  for (int i = 1; i < grid.k; ++i) s += values[i] * (i % 2 == 1 ? 4.0 : 2.0);
  return h / 3.0 * s;
}

}  // namespace stratsurv
