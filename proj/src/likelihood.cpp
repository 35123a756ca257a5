#include "stratsurv/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stratsurv/special.hpp"

namespace stratsurv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLinPredBound = 700.0;
constexpr std::size_t kBlock = 64;  // units per summation block

// In-place pairwise reduction of nblocks rows of width `dim` (dim = 1 for
// scalars). Result lands in row 0. Deterministic for a fixed block count.
void pairwise_reduce(std::vector<double>& rows, std::size_t nblocks, std::size_t dim) {
  for (std::size_t step = 1; step < nblocks; step *= 2) {
    for (std::size_t i = 0; i + step < nblocks; i += 2 * step) {
      double* a = rows.data() + i * dim;
      const double* b = rows.data() + (i + step) * dim;
      for (std::size_t j = 0; j < dim; ++j) a[j] += b[j];
    }
  }
}
}  // namespace

LikelihoodEvaluator::LikelihoodEvaluator(const Dataset& data,
                                         const StrataConfig& config,
                                         const PriorSpec& prior, Family family)
    : config_(config), prior_(prior), n_(data.n()), p_(data.n_covariates()) {
  config_.validate();
  layout_ = ParamLayout::make(config_, p_, family, data.covariate_names);

  for (int z = 0; z < 2; ++z) {
    for (int d = 0; d < 2; ++d) {
      for (Stratum s : compatible_strata(z, d, config_))
        cell_strata_[2 * z + d].push_back(config_.index_of(s));
    }
  }

  units_.resize(n_);
  xdata_.resize(n_ * p_);
  for (std::size_t i = 0; i < n_; ++i) {
    const ObservedUnit& u = data.units[i];
    if (u.x.size() != p_)
      throw UserError("unit " + u.id + ": covariate length mismatch");
    units_[i] = {u.y, u.y > 0.0 ? std::log(u.y) : 0.0, u.delta, 2 * u.z + u.d};
    if (cell_strata_[units_[i].cell].empty())
      throw UserError("unit " + u.id + ": observed (z, d) cell is incompatible with the strata configuration");
    std::copy(u.x.begin(), u.x.end(), xdata_.begin() + i * p_);
  }

  const std::size_t n_active = config_.active.size();
  u_.assign(n_active, 0.0);
  log_terms_.resize(n_active);
  resp_.resize(n_active);
  dlp_.resize(n_active);
  dshape_.resize(n_active);
  term_group_.resize(n_active);
  for (Stratum s : layout_->s_strata())
    s_active_idx_.push_back(config_.index_of(s));
  const std::size_t nblocks = std::max<std::size_t>(1, (n_ + kBlock - 1) / kBlock);
  value_blocks_.resize(nblocks);
  grad_blocks_.resize(nblocks * layout_->dim());
}

LogPosteriorValue LikelihoodEvaluator::eval(std::span<const double> theta) {
  const ParamLayout& L = *layout_;
  const int dim = L.dim();
  const int p = static_cast<int>(p_);
  const std::size_t n_active = config_.active.size();
  const std::size_t n_sblocks = L.s_strata().size();
  const std::size_t n_groups = L.groups().size();
  const int ref_idx = config_.index_of(config_.reference);
  const Family family = L.family();

  LogPosteriorValue out;
  out.gradient.assign(dim, 0.0);

  // T-model shape per group
  shape_buf_.resize(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g)
    shape_buf_[g] = std::exp(theta[L.t_offset(static_cast<int>(g)) + 1 + p]);

  const std::size_t nblocks = std::max<std::size_t>(1, (n_ + kBlock - 1) / kBlock);
  std::fill(value_blocks_.begin(), value_blocks_.end(), 0.0);
  std::fill(grad_blocks_.begin(), grad_blocks_.end(), 0.0);

  for (std::size_t i = 0; i < n_; ++i) {
    const UnitRec& rec = units_[i];
    const double* x = xdata_.data() + i * p_;
    const std::size_t blk = i / kBlock;
    double* gacc = grad_blocks_.data() + blk * dim;

    // strata linear predictors
    for (std::size_t b = 0; b < n_sblocks; ++b) {
      const int off = L.s_offset(static_cast<int>(b));
      double lp = theta[off];
      for (int j = 0; j < p; ++j) lp += x[j] * theta[off + 1 + j];
      u_[s_active_idx_[b]] = lp;
    }
    u_[ref_idx] = 0.0;
    const double lse_u = log_sum_exp(std::span<const double>(u_.data(), n_active));
    if (!std::isfinite(lse_u)) {
      out.value = -kInf;
      out.first_nonfinite_unit = static_cast<int>(i);
      return out;
    }

    // mixture components over the compatible strata
    const auto& comp = cell_strata_[rec.cell];
    const int z = rec.cell / 2;
    std::size_t nterms = 0;
    for (int a_idx : comp) {
      const Stratum s = config_.active[a_idx];
      const int g = L.group_of(s, z);
      const int toff = L.t_offset(g);
      double lp = theta[toff];
      for (int j = 0; j < p; ++j) lp += x[j] * theta[toff + 1 + j];
      if (!(std::abs(lp) <= kLinPredBound)) {
        out.value = -kInf;
        out.first_nonfinite_unit = static_cast<int>(i);
        return out;
      }
      const double log_pi = u_[a_idx] - lse_u;
      double lt, d_dlp, d_dshape;
      if (rec.y == 0.0) {
        lt = 0.0;  // censored at 0: survival is 1 for any theta
        d_dlp = 0.0;
        d_dshape = 0.0;
      } else if (family == Family::weibull) {
        const double phi = shape_buf_[g];
        const double log_phi = theta[toff + 1 + p];
        const double A = std::exp(lp + phi * rec.log_y - log_phi);
        if (rec.delta == 1) {
          lt = -A;
          d_dlp = -A;
          d_dshape = -A * (phi * rec.log_y - 1.0);
        } else {
          lt = (phi - 1.0) * rec.log_y + lp - A;
          d_dlp = 1.0 - A;
          d_dshape = phi * rec.log_y - A * (phi * rec.log_y - 1.0);
        }
      } else {
        const double sigma = shape_buf_[g];
        const double w = (rec.log_y - lp) / sigma;
        if (rec.delta == 1) {
          lt = log_normal_sf(w);
          const double m = normal_mills(w);
          d_dlp = m / sigma;
          d_dshape = m * w;
        } else {
          lt = -rec.log_y - theta[toff + 1 + p] -
               0.9189385332046727417803297364 - 0.5 * w * w;
          d_dlp = w / sigma;
          d_dshape = w * w - 1.0;
        }
      }
      log_terms_[nterms] = log_pi + lt;
      dlp_[nterms] = d_dlp;
      dshape_[nterms] = d_dshape;
      term_group_[nterms] = g;
      ++nterms;
    }

    const double unit_ll =
        log_sum_exp(std::span<const double>(log_terms_.data(), nterms));
    if (!std::isfinite(unit_ll)) {
      out.value = -kInf;
      out.first_nonfinite_unit = static_cast<int>(i);
      return out;
    }
    value_blocks_[blk] += unit_ll;
    for (std::size_t k = 0; k < nterms; ++k)
      resp_[k] = std::exp(log_terms_[k] - unit_ll);

    // S-model gradient: sum_s r_s (1{s=l} - pi_l) = r_l 1{l in comp} - pi_l
    for (std::size_t b = 0; b < n_sblocks; ++b) {
      const int a_idx = s_active_idx_[b];
      double coeff = -std::exp(u_[a_idx] - lse_u);
      for (std::size_t k = 0; k < comp.size(); ++k)
        if (comp[k] == a_idx) coeff += resp_[k];
      const int off = L.s_offset(static_cast<int>(b));
      gacc[off] += coeff;
      for (int j = 0; j < p; ++j) gacc[off + 1 + j] += coeff * x[j];
    }

    // T-model gradient per mixture component
    for (std::size_t k = 0; k < nterms; ++k) {
      const double r = resp_[k];
      const int toff = L.t_offset(term_group_[k]);
      gacc[toff] += r * dlp_[k];
      for (int j = 0; j < p; ++j) gacc[toff + 1 + j] += r * dlp_[k] * x[j];
      gacc[toff + 1 + p] += r * dshape_[k];
    }
  }

  pairwise_reduce(value_blocks_, nblocks, 1);
  pairwise_reduce(grad_blocks_, nblocks, dim);

  ParamVector pv{layout_, std::vector<double>(theta.begin(), theta.end())};
  out.value = value_blocks_[0] + log_prior(pv, prior_);
  std::vector<double> pg(dim);
  log_prior_gradient(pv, prior_, pg);
  for (int j = 0; j < dim; ++j) out.gradient[j] = grad_blocks_[j] + pg[j];

  if (!std::isfinite(out.value)) {
    out.value = -kInf;
    if (out.first_nonfinite_unit < 0) out.first_nonfinite_unit = 0;
  }
  return out;
}

namespace {

// Per-unit component log-terms over the compatible strata; shared by the
// one-off API functions below.
struct UnitTerms {
  std::vector<Stratum> strata;
  std::vector<double> log_terms;
};

UnitTerms unit_terms(const ObservedUnit& unit, const SModelParams& s_params,
                     const TModelParams& t_params, const StrataConfig& config) {
  UnitTerms out;
  out.strata = compatible_strata(unit.z, unit.d, config);
  if (out.strata.empty())
    throw UserError("unit " + unit.id + ": observed (z, d) cell is incompatible with the strata configuration");

  // log strata probabilities via the log-sum-exp of linear predictors
  std::vector<double> u(config.active.size(), 0.0);
  for (std::size_t b = 0; b < s_params.strata.size(); ++b)
    u[config.index_of(s_params.strata[b])] =
        s_params.eta[b] + dot(unit.x, s_params.xi[b]);
  const double lse = log_sum_exp(u);

  for (Stratum s : out.strata) {
    const double log_pi = u[config.index_of(s)] - lse;
    const double lt =
        unit.delta == 1
            ? log_survival(unit.y, s, unit.z, unit.x, t_params)
            : log_density(unit.y, s, unit.z, unit.x, t_params);
    out.log_terms.push_back(log_pi + lt);
  }
  return out;
}

}  // namespace

double unit_log_lik(const ObservedUnit& unit, const ParamVector& theta,
                    const StrataConfig& config) {
  const auto [s_params, t_params] = unpack(theta);
  const auto terms = unit_terms(unit, s_params, t_params, config);
  return log_sum_exp(terms.log_terms);
}

std::vector<double> posterior_strata_probs(const ObservedUnit& unit,
                                           const ParamVector& theta,
                                           const StrataConfig& config) {
  const auto [s_params, t_params] = unpack(theta);
  const auto terms = unit_terms(unit, s_params, t_params, config);
  const double total = log_sum_exp(terms.log_terms);
  std::vector<double> probs(config.active.size(), 0.0);
  for (std::size_t k = 0; k < terms.strata.size(); ++k)
    probs[config.index_of(terms.strata[k])] = std::exp(terms.log_terms[k] - total);
  return probs;
}

LogPosteriorValue log_posterior(const Dataset& data, const ParamVector& theta,
                                const StrataConfig& config,
                                const PriorSpec& prior) {
  LikelihoodEvaluator eval(data, config, prior, theta.layout->family());
  if (eval.layout()->signature() != theta.layout->signature())
    throw std::invalid_argument("log_posterior: theta layout does not match data/config");
  return eval.eval(theta.theta);
}

}  // namespace stratsurv
