#ifndef STRATSURV_SAMPLER_HPP
#define STRATSURV_SAMPLER_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "stratsurv/likelihood.hpp"

namespace stratsurv {

// Numeric failure (initialization, divergent adaptation, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Differentiable log-density target for the sampler. eval() may use
// internal workspace; each chain works on its own clone.
class LogDensityTarget {
 public:
  virtual ~LogDensityTarget() = default;
  virtual int dim() const = 0;
  virtual LogPosteriorValue eval(std::span<const double> theta) = 0;
  virtual std::unique_ptr<LogDensityTarget> clone() const = 0;
  // Per-coordinate multiplier applied to the init jitter.
  virtual double init_scale(int /*coord*/) const { return 1.0; }
};

struct HmcConfig {
  int chains = 6;
  int iterations_per_chain = 1000;
  int warmup = 500;
  double target_accept = 0.8;
  int max_leapfrog_steps = 64;
  std::uint64_t seed = 0;
  double init_jitter = 2.0;
  // > 0: skip step-size adaptation and use this step size throughout.
  double fixed_step_size = 0.0;
  // 0: read STRATSURV_THREADS, else hardware concurrency.
  int workers = 0;

  void validate() const;
};

struct PosteriorDraws {
  int n_chains = 0;
  int kept = 0;  // post-warmup iterations per chain
  int dim = 0;
  std::vector<double> draws;  // [chain][iteration][parameter]
  std::vector<double> lp;     // [chain][iteration]
  std::vector<double> accept_stat;          // per-chain mean acceptance
  std::vector<long> divergences;            // per-chain
  std::vector<double> step_size;            // per-chain adapted step size
  std::vector<std::vector<double>> mass_diag;
  std::shared_ptr<const ParamLayout> layout;  // null for synthetic targets
  std::vector<std::string> names;

  std::span<const double> draw(int chain, int iter) const {
    return {draws.data() + (static_cast<std::size_t>(chain) * kept + iter) * dim,
            static_cast<std::size_t>(dim)};
  }
  double value(int chain, int iter, int param) const {
    return draw(chain, iter)[param];
  }
  int total_draws() const { return n_chains * kept; }
  std::span<const double> flat_draw(int index) const {
    return {draws.data() + static_cast<std::size_t>(index) * dim,
            static_cast<std::size_t>(dim)};
  }
  // Per-chain series of one parameter.
  std::vector<std::vector<double>> parameter_chains(int param) const;
};

struct ChainDiagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  std::vector<double> ess;
  double max_rhat = 0.0;
  double min_ess = 0.0;
};

struct LeapfrogResult {
  std::vector<double> position;
  std::vector<double> momentum;
  double energy_error = 0.0;
  bool divergent = false;
};

// Leapfrog integration of Hamiltonian dynamics with a diagonal mass matrix;
// kinetic energy p' M^{-1} p / 2.
LeapfrogResult leapfrog(std::span<const double> position,
                        std::span<const double> momentum, double step_size,
                        int steps, LogDensityTarget& target,
                        std::span<const double> mass_diag);

// HMC with dual-averaging step-size adaptation and windowed diagonal mass
// estimation during warmup. Deterministic given (target, config.seed),
// independent of worker count.
PosteriorDraws run_hmc(const LogDensityTarget& target, const HmcConfig& config);

// Split-half R-hat over per-chain series of a single parameter.
double split_rhat(const std::vector<std::vector<double>>& chains);

// Autocorrelation-based effective sample size (Geyer initial positive
// sequence), capped at 1.5x the total draw count.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

ChainDiagnostics compute_diagnostics(const PosteriorDraws& draws);

// Fits the principal-stratification model to the data.
std::pair<PosteriorDraws, ChainDiagnostics> run_chains(
    const Dataset& data, const StrataConfig& config, const PriorSpec& prior,
    const HmcConfig& hmc, Family family = Family::weibull);

}  // namespace stratsurv

#endif
