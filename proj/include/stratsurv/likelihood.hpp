#ifndef STRATSURV_LIKELIHOOD_HPP
#define STRATSURV_LIKELIHOOD_HPP

#include <memory>
#include <span>
#include <vector>

#include "stratsurv/data.hpp"
#include "stratsurv/model.hpp"

namespace stratsurv {

struct LogPosteriorValue {
  double value = 0.0;
  std::vector<double> gradient;
  // Index of the first unit whose mixture term was non-finite; -1 if none.
  int first_nonfinite_unit = -1;
};

// Observed-data log posterior with its exact gradient. The value is defined
// up to an additive constant (censoring density, Pr(X), Pr(Z|X) dropped).
//
// Holds precomputed per-unit structures; eval() reuses internal workspace,
// so an evaluator must not be shared across threads (copies are cheap and
// produce bit-identical results).
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const Dataset& data, const StrataConfig& config,
                      const PriorSpec& prior, Family family);

  std::shared_ptr<const ParamLayout> layout() const { return layout_; }
  int dim() const { return layout_->dim(); }
  std::size_t n_units() const { return n_; }

  // Value and gradient at theta. A linear predictor magnitude above 700 or
  // any non-finite unit term yields value = -inf (proposal rejection).
  LogPosteriorValue eval(std::span<const double> theta);

 private:
  struct UnitRec {
    double y = 0.0;
    double log_y = 0.0;
    int delta = 1;
    int cell = 0;  // 2 * z + d
  };

  std::shared_ptr<const ParamLayout> layout_;
  StrataConfig config_;
  PriorSpec prior_;
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::vector<UnitRec> units_;
  std::vector<double> xdata_;  // n x p row-major
  // Per (z, d) cell: active-strata indices of the compatible strata.
  std::vector<int> cell_strata_[4];
  std::vector<int> s_active_idx_;  // active index per non-reference block

  // workspace
  std::vector<double> u_, log_terms_, resp_, dlp_, dshape_, shape_buf_;
  std::vector<int> term_group_;
  std::vector<double> value_blocks_, grad_blocks_;
};

// One unit's mixture log likelihood: log sum over compatible strata of
// Pr(S = s | x) times the survival (delta = 1) or density (delta = 0) term.
double unit_log_lik(const ObservedUnit& unit, const ParamVector& theta,
                    const StrataConfig& config);

// Mixture responsibilities over active strata (config order); strata outside
// the unit's compatible set get 0.
std::vector<double> posterior_strata_probs(const ObservedUnit& unit,
                                           const ParamVector& theta,
                                           const StrataConfig& config);

// Sum of unit log likelihoods plus log prior, with exact gradient.
LogPosteriorValue log_posterior(const Dataset& data, const ParamVector& theta,
                                const StrataConfig& config,
                                const PriorSpec& prior);

}  // namespace stratsurv

#endif
