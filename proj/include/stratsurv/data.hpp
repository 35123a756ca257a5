#ifndef STRATSURV_DATA_HPP
#define STRATSURV_DATA_HPP

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stratsurv {

// User-facing error (bad input data, bad configuration).
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Principal stratum code (D(0), D(1)).
enum class Stratum : int {
  never_taker = 0,   // (0, 0)
  complier = 1,      // (0, 1)
  always_taker = 2,  // (1, 1)
  defier = 3,        // (1, 0)
};

// Potential treatment receipt D(z) implied by the stratum.
constexpr int d_at(Stratum s, int z) {
  switch (s) {
    case Stratum::never_taker: return 0;
    case Stratum::complier: return z == 0 ? 0 : 1;
    case Stratum::always_taker: return 1;
    case Stratum::defier: return z == 0 ? 1 : 0;
  }
  return 0;
}

const char* stratum_code(Stratum s);   // "n", "c", "a", "d"
const char* stratum_name(Stratum s);   // "never_taker", ...
Stratum stratum_from_code(const std::string& code);

// One trial record. `delta` follows the convention delta = 1{T >= C}:
// delta = 1 means the time is censored, delta = 0 means an observed event.
struct ObservedUnit {
  std::string id;
  std::vector<double> x;
  int z = 0;
  int d = 0;
  double y = 0.0;
  int delta = 1;
};

// Which strata are in play and how the outcome parameters are tied.
struct StrataConfig {
  std::vector<Stratum> active;  // ordered
  Stratum reference = Stratum::never_taker;
  bool exclusion_restriction = true;
  bool monotonicity = true;

  // n, c, a (+ d when monotonicity is off), in that order.
  static StrataConfig standard(bool monotonicity, bool exclusion_restriction,
                               Stratum reference = Stratum::never_taker);

  void validate() const;  // throws UserError on invariant violations
  bool is_active(Stratum s) const;
  int index_of(Stratum s) const;  // -1 if not active
};

// Table-1 cell composition intersected with the active strata, in config
// order. Empty means the data contradict the configuration.
std::vector<Stratum> compatible_strata(int z, int d, const StrataConfig& config);

struct Dataset {
  std::vector<ObservedUnit> units;
  std::vector<std::string> covariate_names;
  // Per-covariate (mean, sd) applied at load; (0, 1) where untouched.
  std::vector<std::pair<double, double>> standardization;

  std::size_t n() const { return units.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
};

struct CsvSchema {
  enum class StatusRole { event, censored };

  std::string id;  // empty: synthesize row numbers
  std::string time = "y";
  std::string status = "status";
  StatusRole status_role = StatusRole::censored;
  std::string assignment = "z";
  std::string treatment = "d";
  std::vector<std::string> covariates;
};

// Loads and validates a CSV file (header row required, '#' lines skipped).
// Continuous covariates (more than two distinct values) are standardized
// when `standardize` is set; binary covariates are left alone.
Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 bool standardize, std::vector<std::string>* warnings = nullptr);

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& metadata_lines = {});

struct Diagnostic {
  enum class Severity { warning, contradiction };
  Severity severity = Severity::warning;
  std::string message;
};

// Empty result means the dataset is consistent with the configuration and
// every model cell the configuration implies has data behind it.
std::vector<Diagnostic> validate_consistency(const Dataset& data,
                                             const StrataConfig& config);

}  // namespace stratsurv

#endif
