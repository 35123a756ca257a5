#ifndef STRATSURV_MODEL_HPP
#define STRATSURV_MODEL_HPP

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stratsurv/data.hpp"

namespace stratsurv {

enum class Family { weibull, lognormal };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

// One set of outcome parameters shared by the listed (stratum, arm) cells.
// Under exclusion restriction the two arms of a stratum with D(0) = D(1)
// collapse into a single group.
struct ParamGroup {
  std::string name;  // "n" when tied, "c0"/"c1" when arm-specific
  std::vector<std::pair<Stratum, int>> cells;
};

std::vector<ParamGroup> build_groups(const StrataConfig& config);

struct PriorSpec {
  double coefficient_sd = 100.0;          // sigma_xi, S-model coefficients
  double outcome_coefficient_sd = 100.0;  // sigma_beta, T-model coefficients
};

// Flat-vector packing: for each non-reference stratum (config order)
// [eta, xi...]; then for each group [intercept, beta..., log_shape].
class ParamLayout {
 public:
  enum class Role { intercept, coefficient, log_shape };

  static std::shared_ptr<const ParamLayout> make(
      const StrataConfig& config, std::size_t p, Family family,
      const std::vector<std::string>& covariate_names = {});

  int dim() const { return dim_; }
  std::size_t n_covariates() const { return p_; }
  Family family() const { return family_; }
  const StrataConfig& config() const { return config_; }
  const std::vector<Stratum>& s_strata() const { return s_strata_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const std::vector<std::string>& names() const { return names_; }
  Role role(int coord) const { return roles_[coord]; }

  int s_offset(int block) const { return block * (1 + static_cast<int>(p_)); }
  int t_offset(int group) const {
    return s_total_ + group * (2 + static_cast<int>(p_));
  }
  // -1 when the stratum is inactive.
  int group_of(Stratum s, int z) const {
    return group_of_[static_cast<int>(s)][z];
  }

  // Layout signature for cross-file compatibility checks.
  std::string signature() const;

 private:
  ParamLayout() = default;
  StrataConfig config_;
  std::size_t p_ = 0;
  Family family_ = Family::weibull;
  std::vector<Stratum> s_strata_;
  std::vector<ParamGroup> groups_;
  std::vector<std::string> names_;
  std::vector<Role> roles_;
  int group_of_[4][2] = {{-1, -1}, {-1, -1}, {-1, -1}, {-1, -1}};
  int s_total_ = 0;
  int dim_ = 0;
};

struct ParamVector {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<double> theta;
};

// Multinomial-logit strata model; the reference stratum carries no
// parameters. Blocks follow the layout's non-reference order.
struct SModelParams {
  std::vector<Stratum> strata;
  std::vector<double> eta;
  std::vector<std::vector<double>> xi;
};

struct TModelParams {
  Family family = Family::weibull;
  std::vector<ParamGroup> groups;
  std::vector<double> intercept;   // alpha (Weibull) / mu (lognormal)
  std::vector<std::vector<double>> beta;
  std::vector<double> log_shape;   // log phi / log sigma

  int group_of(Stratum s, int z) const { return group_table[static_cast<int>(s)][z]; }
  double shape(int g) const { return std::exp(log_shape[g]); }
  int group_table[4][2] = {{-1, -1}, {-1, -1}, {-1, -1}, {-1, -1}};
};

std::pair<SModelParams, TModelParams> unpack(const ParamVector& theta);
ParamVector pack(const SModelParams& s, const TModelParams& t,
                 std::shared_ptr<const ParamLayout> layout);

// Pr(S = s | x) over active strata in config order; sums to 1.
std::vector<double> strata_probs(std::span<const double> x,
                                 const SModelParams& params,
                                 const StrataConfig& config);

// log Pr(T >= t | s, z, x) and log density of T at t.
double log_survival(double t, Stratum s, int z, std::span<const double> x,
                    const TModelParams& params);
double log_density(double t, Stratum s, int z, std::span<const double> x,
                   const TModelParams& params);

// Gaussian log prior over coefficient entries, up to an additive constant;
// intercepts and log shapes are flat.
double log_prior(const ParamVector& theta, const PriorSpec& prior);
void log_prior_gradient(const ParamVector& theta, const PriorSpec& prior,
                        std::span<double> grad_out);

// --- scalar kernels (shared by likelihood and estimand evaluation) ---

inline double dot(std::span<const double> x, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * b[i];
  return s;
}

// log S(t) = -(1/phi) t^phi exp(lp)
inline double weibull_log_survival(double t, double lp, double phi) {
  if (t == 0.0) return 0.0;
  return -std::exp(lp + phi * std::log(t) - std::log(phi));
}

// log f(t) = (phi - 1) log t + lp + log S(t)
inline double weibull_log_density(double t, double lp, double phi) {
  if (t == 0.0) {
    if (phi < 1.0) throw std::domain_error("weibull density diverges at t = 0 for phi < 1");
    return phi == 1.0 ? lp : -std::numeric_limits<double>::infinity();
  }
  return (phi - 1.0) * std::log(t) + lp + weibull_log_survival(t, lp, phi);
}

// log Phi(-w), stable for all w.
double log_normal_sf(double w);
// Mills ratio phi(w) / Phi(-w).
double normal_mills(double w);

inline double lognormal_log_survival(double t, double lp, double sigma) {
  if (t == 0.0) return 0.0;
  return log_normal_sf((std::log(t) - lp) / sigma);
}

inline double lognormal_log_density(double t, double lp, double sigma) {
  if (t == 0.0) throw std::domain_error("lognormal density is degenerate at t = 0");
  const double w = (std::log(t) - lp) / sigma;
  return -std::log(t) - std::log(sigma) - 0.9189385332046727417803297364 -
         0.5 * w * w;
}

}  // namespace stratsurv

#endif
