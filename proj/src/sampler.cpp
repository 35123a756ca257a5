#include "stratsurv/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include "stratsurv/rng.hpp"

namespace stratsurv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void HmcConfig::validate() const {
  if (chains < 1) throw UserError("hmc: chains must be >= 1");
  if (iterations_per_chain < 1) throw UserError("hmc: iterations must be >= 1");
  if (warmup < 1 || warmup >= iterations_per_chain)
    throw UserError("hmc: warmup must satisfy 1 <= warmup < iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw UserError("hmc: target_accept must lie in (0, 1)");
  if (max_leapfrog_steps < 1) throw UserError("hmc: max_leapfrog_steps must be >= 1");
  if (!(init_jitter > 0.0)) throw UserError("hmc: init_jitter must be positive");
}

std::vector<std::vector<double>> PosteriorDraws::parameter_chains(int param) const {
  std::vector<std::vector<double>> out(n_chains);
  for (int c = 0; c < n_chains; ++c) {
    out[c].resize(kept);
    for (int i = 0; i < kept; ++i) out[c][i] = value(c, i, param);
  }
  return out;
}

namespace {

double hamiltonian(double value, std::span<const double> momentum,
                   std::span<const double> mass_diag) {
  double kin = 0.0;
  for (std::size_t j = 0; j < momentum.size(); ++j)
    kin += momentum[j] * momentum[j] / mass_diag[j];
  return -value + 0.5 * kin;
}

// Core integrator; the initial gradient/value may be supplied to avoid a
// redundant target evaluation.
LeapfrogResult leapfrog_core(std::span<const double> position,
                             std::span<const double> momentum, double step_size,
                             int steps, LogDensityTarget& target,
                             std::span<const double> mass_diag,
                             const LogPosteriorValue& at_start,
                             LogPosteriorValue* at_end) {
  const int d = target.dim();
  LeapfrogResult r;
  r.position.assign(position.begin(), position.end());
  r.momentum.assign(momentum.begin(), momentum.end());

  const double h0 = hamiltonian(at_start.value, momentum, mass_diag);
  if (!std::isfinite(h0)) {
    r.divergent = true;
    r.energy_error = kInf;
    return r;
  }

  LogPosteriorValue cur = at_start;
  for (int j = 0; j < d; ++j) r.momentum[j] += 0.5 * step_size * cur.gradient[j];
  for (int l = 1; l <= steps; ++l) {
    for (int j = 0; j < d; ++j)
      r.position[j] += step_size * r.momentum[j] / mass_diag[j];
    cur = target.eval(r.position);
    if (!std::isfinite(cur.value)) {
      r.divergent = true;
      r.energy_error = kInf;
      return r;
    }
    const double w = (l == steps) ? 0.5 : 1.0;
    for (int j = 0; j < d; ++j) r.momentum[j] += w * step_size * cur.gradient[j];
  }

  const double h1 = hamiltonian(cur.value, r.momentum, mass_diag);
  r.energy_error = h1 - h0;
  if (!std::isfinite(h1)) r.divergent = true;
  if (at_end) *at_end = std::move(cur);
  return r;
}

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int count = 0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    count = 0;
  }
  void update(double accept_prob, double target) {
    ++count;
    const double frac = 1.0 / (count + kT0);
    h_bar = (1.0 - frac) * h_bar + frac * (target - accept_prob);
    log_eps = mu - std::sqrt(static_cast<double>(count)) / kGamma * h_bar;
    const double eta = std::pow(static_cast<double>(count), -kKappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
  double eps() const { return std::exp(log_eps); }
  double eps_bar() const { return std::exp(log_eps_bar); }
};

// Running mean/variance for the mass-matrix windows.
struct Welford {
  std::vector<double> mean, m2;
  long n = 0;
  void reset(int d) {
    mean.assign(d, 0.0);
    m2.assign(d, 0.0);
    n = 0;
  }
  void add(std::span<const double> x) {
    ++n;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d1 = x[j] - mean[j];
      mean[j] += d1 / n;
      m2[j] += d1 * (x[j] - mean[j]);
    }
  }
  // Sample variance shrunk toward 1 with weight 5/(n+5).
  std::vector<double> regularized_variance() const {
    std::vector<double> v(mean.size(), 1.0);
    if (n < 2) return v;
    const double w = static_cast<double>(n) / (n + 5.0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double s2 = m2[j] / (n - 1);
      v[j] = w * s2 + (1.0 - w);
      if (!(v[j] > 0.0) || !std::isfinite(v[j])) v[j] = 1.0;
    }
    return v;
  }
};

struct ChainResult {
  std::vector<double> draws, lp;
  double accept_stat = 0.0;
  long divergences = 0;
  double step_size = 0.0;
  std::vector<double> mass_diag;
};

double find_initial_step_size(LogDensityTarget& target,
                              std::span<const double> position,
                              const LogPosteriorValue& at_start,
                              std::span<const double> mass_diag,
                              CounterRng& rng) {
  const int d = target.dim();
  std::vector<double> momentum(d);
  for (int j = 0; j < d; ++j) momentum[j] = rng.normal() * std::sqrt(mass_diag[j]);

  double eps = 1.0;
  auto accept_at = [&](double e) {
    const auto r = leapfrog_core(position, momentum, e, 1, target, mass_diag,
                                 at_start, nullptr);
    return r.divergent ? 0.0 : std::min(1.0, std::exp(-r.energy_error));
  };
  double a = accept_at(eps);
  const bool up = a > 0.5;
  for (int it = 0; it < 100; ++it) {
    eps *= up ? 2.0 : 0.5;
    if (eps > 1e7 || eps < 1e-10) break;
    a = accept_at(eps);
    if (up != (a > 0.5)) break;
  }
  return eps;
}

ChainResult run_single_chain(const LogDensityTarget& proto, const HmcConfig& cfg,
                             int chain_index) {
  auto target = proto.clone();
  const int d = target->dim();
  CounterRng rng = CounterRng::stream(cfg.seed, "chain", chain_index);

  // initialization: jitter until the log density is finite
  std::vector<double> position(d);
  LogPosteriorValue state;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (int j = 0; j < d; ++j)
      position[j] = rng.uniform(-cfg.init_jitter, cfg.init_jitter) *
                    target->init_scale(j);
    state = target->eval(position);
    ok = std::isfinite(state.value);
  }
  if (!ok)
    throw NumericError("chain " + std::to_string(chain_index) +
                       ": no finite log posterior found in 100 initialization attempts");

  std::vector<double> mass_diag(d, 1.0);
  const bool adapt = cfg.fixed_step_size <= 0.0;
  double eps = adapt ? find_initial_step_size(*target, position, state, mass_diag, rng)
                     : cfg.fixed_step_size;
  DualAveraging da;
  da.restart(eps);

  // expanding mass windows: 15% / 40% / 45% of warmup
  const int w1 = std::max(1, static_cast<int>(std::lround(0.15 * cfg.warmup)));
  const int w2 = std::max(w1 + 1, static_cast<int>(std::lround(0.55 * cfg.warmup)));
  Welford welford;
  welford.reset(d);

  const int kept = cfg.iterations_per_chain - cfg.warmup;
  ChainResult res;
  res.draws.resize(static_cast<std::size_t>(kept) * d);
  res.lp.resize(kept);

  std::vector<double> momentum(d);
  double accept_sum = 0.0;

  for (int iter = 0; iter < cfg.iterations_per_chain; ++iter) {
    const bool warm = iter < cfg.warmup;
    for (int j = 0; j < d; ++j) momentum[j] = rng.normal() * std::sqrt(mass_diag[j]);
    const int steps =
        static_cast<int>(rng.uniform_int(1, cfg.max_leapfrog_steps));

    LogPosteriorValue proposed_state;
    const auto lf = leapfrog_core(position, momentum, eps, steps, *target,
                                  mass_diag, state, &proposed_state);
    double accept_prob = 0.0;
    if (lf.divergent) {
      ++res.divergences;
    } else {
      accept_prob = std::min(1.0, std::exp(-lf.energy_error));
    }
    if (!lf.divergent && rng.uniform() < accept_prob) {
      position = lf.position;
      state = std::move(proposed_state);
    }

    if (warm) {
      if (adapt) {
        da.update(accept_prob, cfg.target_accept);
        eps = da.eps();
      }
      welford.add(position);
      const int done = iter + 1;
      if (done == w1 || done == w2 || done == cfg.warmup) {
        mass_diag = welford.regularized_variance();
        welford.reset(d);
        if (adapt) {
          eps = da.eps_bar();
          da.restart(eps);
        }
      }
      if (done == cfg.warmup && adapt) eps = da.eps_bar();
    } else {
      accept_sum += accept_prob;
      const int k = iter - cfg.warmup;
      std::copy(position.begin(), position.end(),
                res.draws.begin() + static_cast<std::size_t>(k) * d);
      res.lp[k] = state.value;
    }
  }

  res.accept_stat = accept_sum / kept;
  res.step_size = eps;
  res.mass_diag = mass_diag;
  return res;
}

int resolve_workers(const HmcConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("STRATSURV_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

LeapfrogResult leapfrog(std::span<const double> position,
                        std::span<const double> momentum, double step_size,
                        int steps, LogDensityTarget& target,
                        std::span<const double> mass_diag) {
  if (steps < 1) throw std::invalid_argument("leapfrog: steps must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("leapfrog: step_size must be positive");
  for (double m : mass_diag)
    if (!(m > 0.0)) throw std::invalid_argument("leapfrog: mass_diag must be strictly positive");
  const auto start = target.eval(position);
  return leapfrog_core(position, momentum, step_size, steps, target, mass_diag,
                       start, nullptr);
}

PosteriorDraws run_hmc(const LogDensityTarget& target, const HmcConfig& config) {
  config.validate();
  const int d = target.dim();

  PosteriorDraws out;
  out.n_chains = config.chains;
  out.kept = config.iterations_per_chain - config.warmup;
  out.dim = d;
  out.draws.resize(static_cast<std::size_t>(config.chains) * out.kept * d);
  out.lp.resize(static_cast<std::size_t>(config.chains) * out.kept);
  out.accept_stat.resize(config.chains);
  out.divergences.resize(config.chains);
  out.step_size.resize(config.chains);
  out.mass_diag.resize(config.chains);
  for (int j = 0; j < d; ++j) out.names.push_back("p" + std::to_string(j));

  const int workers = std::min(resolve_workers(config), config.chains);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker_fn = [&](int worker_id) {
    for (int c = worker_id; c < config.chains; c += workers) {
      try {
        ChainResult r = run_single_chain(target, config, c);
        std::copy(r.draws.begin(), r.draws.end(),
                  out.draws.begin() + static_cast<std::size_t>(c) * out.kept * d);
        std::copy(r.lp.begin(), r.lp.end(),
                  out.lp.begin() + static_cast<std::size_t>(c) * out.kept);
        out.accept_stat[c] = r.accept_stat;
        out.divergences[c] = r.divergences;
        out.step_size[c] = r.step_size;
        out.mass_diag[c] = std::move(r.mass_diag);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  if (workers <= 1) {
    worker_fn(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn, w);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("split_rhat: need >= 2 chains");
  std::size_t min_len = chains[0].size();
  for (const auto& c : chains) min_len = std::min(min_len, c.size());
  if (min_len < 4) throw std::invalid_argument("split_rhat: need >= 4 draws per chain");

  const std::size_t half = min_len / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (int part = 0; part < 2; ++part) {
      const std::size_t begin = part == 0 ? 0 : half;
      double m = 0.0;
      for (std::size_t i = 0; i < half; ++i) m += c[begin + i];
      m /= half;
      double ss = 0.0;
      for (std::size_t i = 0; i < half; ++i)
        ss += (c[begin + i] - m) * (c[begin + i] - m);
      means.push_back(m);
      vars.push_back(ss / (half - 1));
    }
  }

  const std::size_t m_seq = means.size();
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m_seq;
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= m_seq;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= static_cast<double>(half) / (m_seq - 1);

  if (w <= 0.0) return b <= 0.0 ? 1.0 : kInf;
  const double var_plus = (half - 1.0) / half * w + b / half;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2)
    throw std::invalid_argument("effective_sample_size: need >= 2 chains");
  std::size_t min_len = chains[0].size();
  for (const auto& c : chains) min_len = std::min(min_len, c.size());
  if (min_len < 4)
    throw std::invalid_argument("effective_sample_size: need >= 4 draws per chain");

  // split each chain in half
  std::vector<std::vector<double>> seqs;
  const std::size_t half = min_len / 2;
  for (const auto& c : chains) {
    seqs.emplace_back(c.begin(), c.begin() + half);
    seqs.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  const std::size_t m_seq = seqs.size();
  const std::size_t len = half;
  const double total = static_cast<double>(m_seq * len);

  std::vector<double> means(m_seq), vars(m_seq);
  for (std::size_t j = 0; j < m_seq; ++j) {
    double m = 0.0;
    for (double v : seqs[j]) m += v;
    m /= len;
    double ss = 0.0;
    for (double v : seqs[j]) ss += (v - m) * (v - m);
    means[j] = m;
    vars[j] = ss / (len - 1);
  }
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m_seq;
  if (w <= 0.0) return total;  // constant chains: define ESS = N

  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= m_seq;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= static_cast<double>(len) / (m_seq - 1);
  const double var_plus = (len - 1.0) / len * w + b / len;

  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t j = 0; j < m_seq; ++j) {
      double a = 0.0;
      for (std::size_t i = 0; i + lag < len; ++i)
        a += (seqs[j][i] - means[j]) * (seqs[j][i + lag] - means[j]);
      s += a / len;
    }
    return s / m_seq;
  };

  auto rho = [&](std::size_t lag) {
    return 1.0 - (w - mean_acov(lag)) / var_plus;
  };

  // Geyer initial monotone positive sequence over lag pairs
  double tau = -1.0;
  double prev_pair = kInf;
  for (std::size_t k = 0; 2 * k + 1 < len; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / 1.5);  // cap ESS at 1.5x total
  return std::min(total / tau, 1.5 * total);
}

ChainDiagnostics compute_diagnostics(const PosteriorDraws& draws) {
  ChainDiagnostics d;
  d.names = draws.names;
  d.max_rhat = 1.0;
  d.min_ess = kInf;
  for (int j = 0; j < draws.dim; ++j) {
    const auto chains = draws.parameter_chains(j);
    d.rhat.push_back(split_rhat(chains));
    d.ess.push_back(effective_sample_size(chains));
    d.max_rhat = std::max(d.max_rhat, d.rhat.back());
    d.min_ess = std::min(d.min_ess, d.ess.back());
  }
  if (draws.dim == 0) d.min_ess = 0.0;
  return d;
}

namespace {

class PosteriorTarget final : public LogDensityTarget {
 public:
  PosteriorTarget(const Dataset& data, const StrataConfig& config,
                  const PriorSpec& prior, Family family)
      : eval_(data, config, prior, family) {}

  int dim() const override { return eval_.dim(); }
  LogPosteriorValue eval(std::span<const double> theta) override {
    return eval_.eval(theta);
  }
  std::unique_ptr<LogDensityTarget> clone() const override {
    return std::make_unique<PosteriorTarget>(*this);
  }
  double init_scale(int coord) const override {
    // intercepts/coefficients jitter on [-j, j], log shapes on [-j/2, j/2]
    return eval_.layout()->role(coord) == ParamLayout::Role::log_shape ? 0.5 : 1.0;
  }
  std::shared_ptr<const ParamLayout> layout() const { return eval_.layout(); }

 private:
  LikelihoodEvaluator eval_;
};

}  // namespace

std::pair<PosteriorDraws, ChainDiagnostics> run_chains(const Dataset& data,
                                                       const StrataConfig& config,
                                                       const PriorSpec& prior,
                                                       const HmcConfig& hmc,
                                                       Family family) {
  PosteriorTarget target(data, config, prior, family);
  PosteriorDraws draws = run_hmc(target, hmc);
  draws.layout = target.layout();
  draws.names = target.layout()->names();
  ChainDiagnostics diag = compute_diagnostics(draws);
  diag.names = draws.names;
  return {std::move(draws), std::move(diag)};
}

}  // namespace stratsurv
