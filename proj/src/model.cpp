#include "stratsurv/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stratsurv/special.hpp"

namespace stratsurv {

const char* family_name(Family f) {
  return f == Family::weibull ? "weibull" : "lognormal";
}

Family family_from_name(const std::string& name) {
  if (name == "weibull") return Family::weibull;
  if (name == "lognormal") return Family::lognormal;
  throw UserError("unknown outcome family: " + name);
}

std::vector<ParamGroup> build_groups(const StrataConfig& config) {
  std::vector<ParamGroup> groups;
  for (Stratum s : config.active) {
    const bool tied = config.exclusion_restriction && d_at(s, 0) == d_at(s, 1);
    if (tied) {
      groups.push_back({stratum_code(s), {{s, 0}, {s, 1}}});
    } else {
      groups.push_back({std::string(stratum_code(s)) + "0", {{s, 0}}});
      groups.push_back({std::string(stratum_code(s)) + "1", {{s, 1}}});
    }
  }
  return groups;
}

std::shared_ptr<const ParamLayout> ParamLayout::make(
    const StrataConfig& config, std::size_t p, Family family,
    const std::vector<std::string>& covariate_names) {
  config.validate();
  auto covname = [&](std::size_t j) {
    return j < covariate_names.size() ? covariate_names[j]
                                      : "x" + std::to_string(j + 1);
  };

  auto layout = std::shared_ptr<ParamLayout>(new ParamLayout());
  layout->config_ = config;
  layout->p_ = p;
  layout->family_ = family;
  for (Stratum s : config.active)
    if (s != config.reference) layout->s_strata_.push_back(s);
  layout->groups_ = build_groups(config);
  for (std::size_t g = 0; g < layout->groups_.size(); ++g)
    for (auto [s, z] : layout->groups_[g].cells)
      layout->group_of_[static_cast<int>(s)][z] = static_cast<int>(g);

  for (Stratum s : layout->s_strata_) {
    layout->names_.push_back(std::string("eta[") + stratum_code(s) + "]");
    layout->roles_.push_back(Role::intercept);
    for (std::size_t j = 0; j < p; ++j) {
      layout->names_.push_back(std::string("xi[") + stratum_code(s) + "]." + covname(j));
      layout->roles_.push_back(Role::coefficient);
    }
  }
  layout->s_total_ = static_cast<int>(layout->names_.size());

  const char* intercept_tag = family == Family::weibull ? "alpha[" : "mu[";
  const char* shape_tag = family == Family::weibull ? "log_phi[" : "log_sigma[";
  for (const auto& g : layout->groups_) {
    layout->names_.push_back(intercept_tag + g.name + "]");
    layout->roles_.push_back(Role::intercept);
    for (std::size_t j = 0; j < p; ++j) {
      layout->names_.push_back("beta[" + g.name + "]." + covname(j));
      layout->roles_.push_back(Role::coefficient);
    }
    layout->names_.push_back(shape_tag + g.name + "]");
    layout->roles_.push_back(Role::log_shape);
  }
  layout->dim_ = static_cast<int>(layout->names_.size());
  return layout;
}

std::string ParamLayout::signature() const {
  std::string sig = family_name(family_);
  for (const auto& n : names_) {
    sig += '|';
    sig += n;
  }
  return sig;
}

std::pair<SModelParams, TModelParams> unpack(const ParamVector& theta) {
  const auto& L = *theta.layout;
  if (static_cast<int>(theta.theta.size()) != L.dim())
    throw std::invalid_argument("unpack: theta length does not match layout");
  const std::size_t p = L.n_covariates();

  SModelParams s;
  s.strata = L.s_strata();
  for (std::size_t b = 0; b < s.strata.size(); ++b) {
    const int off = L.s_offset(static_cast<int>(b));
    s.eta.push_back(theta.theta[off]);
    s.xi.emplace_back(theta.theta.begin() + off + 1, theta.theta.begin() + off + 1 + p);
  }

  TModelParams t;
  t.family = L.family();
  t.groups = L.groups();
  for (int i = 0; i < 4; ++i)
    for (int z = 0; z < 2; ++z)
      t.group_table[i][z] = L.group_of(static_cast<Stratum>(i), z);
  for (std::size_t g = 0; g < t.groups.size(); ++g) {
    const int off = L.t_offset(static_cast<int>(g));
    t.intercept.push_back(theta.theta[off]);
    t.beta.emplace_back(theta.theta.begin() + off + 1, theta.theta.begin() + off + 1 + p);
    t.log_shape.push_back(theta.theta[off + 1 + p]);
  }
  return {std::move(s), std::move(t)};
}

ParamVector pack(const SModelParams& s, const TModelParams& t,
                 std::shared_ptr<const ParamLayout> layout) {
  const std::size_t p = layout->n_covariates();
  ParamVector out{layout, std::vector<double>(layout->dim(), 0.0)};
  for (std::size_t b = 0; b < s.strata.size(); ++b) {
    const int off = layout->s_offset(static_cast<int>(b));
    out.theta[off] = s.eta[b];
    for (std::size_t j = 0; j < p; ++j) out.theta[off + 1 + j] = s.xi[b][j];
  }
  for (std::size_t g = 0; g < t.groups.size(); ++g) {
    const int off = layout->t_offset(static_cast<int>(g));
    out.theta[off] = t.intercept[g];
    for (std::size_t j = 0; j < p; ++j) out.theta[off + 1 + j] = t.beta[g][j];
    out.theta[off + 1 + p] = t.log_shape[g];
  }
  return out;
}

std::vector<double> strata_probs(std::span<const double> x,
                                 const SModelParams& params,
                                 const StrataConfig& config) {
  std::vector<double> u(config.active.size(), 0.0);
  for (std::size_t b = 0; b < params.strata.size(); ++b) {
    const int idx = config.index_of(params.strata[b]);
    if (idx < 0) throw std::invalid_argument("strata_probs: parameter stratum not active");
    u[idx] = params.eta[b] + dot(x, params.xi[b]);
    if (!std::isfinite(u[idx]))
      throw std::domain_error("strata_probs: non-finite linear predictor");
  }
  const double lse = log_sum_exp(u);
  std::vector<double> probs(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) probs[i] = std::exp(u[i] - lse);
  return probs;
}

namespace {
const ParamGroup& group_for(const TModelParams& params, Stratum s, int z) {
  const int g = params.group_of(s, z);
  if (g < 0) throw std::invalid_argument("no parameter group for this (stratum, arm)");
  return params.groups[g];
}
}  // namespace

double log_survival(double t, Stratum s, int z, std::span<const double> x,
                    const TModelParams& params) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::domain_error("log_survival: t must be finite and nonnegative");
  const int g = params.group_of(s, z);
  (void)group_for(params, s, z);
  const double lp = params.intercept[g] + dot(x, params.beta[g]);
  return params.family == Family::weibull
             ? weibull_log_survival(t, lp, params.shape(g))
             : lognormal_log_survival(t, lp, params.shape(g));
}

double log_density(double t, Stratum s, int z, std::span<const double> x,
                   const TModelParams& params) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::domain_error("log_density: t must be finite and nonnegative");
  const int g = params.group_of(s, z);
  (void)group_for(params, s, z);
  const double lp = params.intercept[g] + dot(x, params.beta[g]);
  return params.family == Family::weibull
             ? weibull_log_density(t, lp, params.shape(g))
             : lognormal_log_density(t, lp, params.shape(g));
}

double log_prior(const ParamVector& theta, const PriorSpec& prior) {
  const auto& L = *theta.layout;
  double lp = 0.0;
  for (int i = 0; i < L.dim(); ++i) {
    if (L.role(i) != ParamLayout::Role::coefficient) continue;
    const double sd = i < L.s_offset(static_cast<int>(L.s_strata().size()))
                          ? prior.coefficient_sd
                          : prior.outcome_coefficient_sd;
    const double v = theta.theta[i] / sd;
    lp -= 0.5 * v * v;
  }
  return lp;
}

void log_prior_gradient(const ParamVector& theta, const PriorSpec& prior,
                        std::span<double> grad_out) {
  const auto& L = *theta.layout;
  for (int i = 0; i < L.dim(); ++i) {
    if (L.role(i) != ParamLayout::Role::coefficient) {
      grad_out[i] = 0.0;
      continue;
    }
    const double sd = i < L.s_offset(static_cast<int>(L.s_strata().size()))
                          ? prior.coefficient_sd
                          : prior.outcome_coefficient_sd;
    grad_out[i] = -theta.theta[i] / (sd * sd);
  }
}

double log_normal_sf(double w) {
  if (w < 30.0) {
    return std::log(0.5 * std::erfc(w * 0.7071067811865475244));
  }
  // Asymptotic tail: Phi(-w) = phi(w)/w * (1 - 1/w^2 + 3/w^4 - 15/w^6 + 105/w^8 - ...)
  const double iw2 = 1.0 / (w * w);
  const double series = 1.0 + iw2 * (-1.0 + iw2 * (3.0 + iw2 * (-15.0 + iw2 * 105.0)));
  return -0.5 * w * w - 0.9189385332046727417803297364 - std::log(w) +
         std::log(series);
}

double normal_mills(double w) {
  const double log_pdf = -0.5 * w * w - 0.9189385332046727417803297364;
  return std::exp(log_pdf - log_normal_sf(w));
}

}  // namespace stratsurv
