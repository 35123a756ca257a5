#ifndef STRATSURV_ESTIMANDS_HPP
#define STRATSURV_ESTIMANDS_HPP

#include <optional>
#include <vector>

#include "stratsurv/data.hpp"
#include "stratsurv/sampler.hpp"

namespace stratsurv {

struct CurveSummary {
  std::vector<double> mean, lo, hi;  // per time; equal-tailed 2.5% / 97.5%
};

// Posterior of the covariate-averaged survival function G(t; s, z).
struct SurvivalCurve {
  Stratum stratum = Stratum::never_taker;
  int arm = 0;
  std::vector<double> times;
  std::vector<double> values;  // [draw][time]; NaN rows for excluded draws
  int n_draws = 0;
  std::vector<char> excluded;  // per-draw: stratum probability underflow
  int n_excluded = 0;
  CurveSummary summary;

  double at(int draw, int time_index) const {
    return values[static_cast<std::size_t>(draw) * times.size() + time_index];
  }
};

enum class EffectKind { spce, race };

struct EffectCurve {
  std::optional<Stratum> stratum;  // nullopt: ITT aggregate
  EffectKind kind = EffectKind::spce;
  std::vector<double> times;
  std::vector<double> values;  // [draw][time]
  int n_draws = 0;
  std::vector<char> excluded;
  int n_excluded = 0;
  CurveSummary summary;

  double at(int draw, int time_index) const {
    return values[static_cast<std::size_t>(draw) * times.size() + time_index];
  }
};

struct KmCurve {
  int arm = 0;
  long n_units = 0;
  std::vector<double> times;     // event times (steps)
  std::vector<double> survival;  // value just after each step
  std::vector<double> variance;  // Greenwood
  std::vector<double> lo, hi;
};

enum class Integration { closed_form, trapezoid, simpson };

std::vector<double> uniform_grid(double t_max, int points = 101);

// Posterior survival curve: per draw, the A-weighted average of each unit's
// survival probability, A_i = Pr(S = s | x_i). Draws whose total stratum
// probability underflows (< 1e-300) are flagged and excluded from summaries.
SurvivalCurve survival_posterior(const Dataset& data, const PosteriorDraws& draws,
                                 const StrataConfig& config, Stratum s, int z,
                                 const std::vector<double>& times);

// Pointwise per-draw difference G(t; s, 1) - G(t; s, 0).
EffectCurve spce(const SurvivalCurve& curve1, const SurvivalCurve& curve0);

// Per-draw restricted mean int_0^t G(u; s, z) du via the incomplete-gamma
// closed form; Weibull family only.
std::vector<double> restricted_mean_closed_form(const Dataset& data,
                                                const PosteriorDraws& draws,
                                                const StrataConfig& config,
                                                Stratum s, int z, double t);

// RACE(t) over a time grid via the closed form.
EffectCurve race_closed_form(const Dataset& data, const PosteriorDraws& draws,
                             const StrataConfig& config, Stratum s,
                             const std::vector<double>& times);

// Per-draw RACE at one time by integrating freshly evaluated survival curves
// on a k-subinterval grid.
std::vector<double> race_numerical(const Dataset& data, const PosteriorDraws& draws,
                                   const StrataConfig& config, Stratum s, double t,
                                   int k, Integration method);

// RACE over the curves' shared grid via cumulative trapezoid.
EffectCurve race_from_curves(const SurvivalCurve& curve1, const SurvivalCurve& curve0);

// Per-draw model-implied stratum proportions (average of Pr(S = s | x_i)
// over units), active-strata order.
std::vector<std::vector<double>> stratum_proportions(const Dataset& data,
                                                     const PosteriorDraws& draws,
                                                     const StrataConfig& config);

// ITT effect: per-draw weighted average of the per-stratum effects; weights
// must sum to 1 within 1e-9 for every draw.
EffectCurve itt_aggregate(const std::vector<EffectCurve>& effects,
                          const std::vector<std::vector<double>>& strata_weights);

// Product-limit estimator for one arm; delta = 0 marks events.
KmCurve kaplan_meier(const Dataset& data, int arm);

}  // namespace stratsurv

#endif
