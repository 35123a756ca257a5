#include "stratsurv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stratsurv {

const char* stratum_code(Stratum s) {
  switch (s) {
    case Stratum::never_taker: return "n";
    case Stratum::complier: return "c";
    case Stratum::always_taker: return "a";
    case Stratum::defier: return "d";
  }
  return "?";
}

const char* stratum_name(Stratum s) {
  switch (s) {
    case Stratum::never_taker: return "never_taker";
    case Stratum::complier: return "complier";
    case Stratum::always_taker: return "always_taker";
    case Stratum::defier: return "defier";
  }
  return "?";
}

Stratum stratum_from_code(const std::string& code) {
  if (code == "n" || code == "never_taker") return Stratum::never_taker;
  if (code == "c" || code == "complier") return Stratum::complier;
  if (code == "a" || code == "always_taker") return Stratum::always_taker;
  if (code == "d" || code == "defier") return Stratum::defier;
  throw UserError("unknown stratum code: " + code);
}

StrataConfig StrataConfig::standard(bool monotonicity, bool exclusion_restriction,
                                    Stratum reference) {
  StrataConfig c;
  c.active = {Stratum::never_taker, Stratum::complier, Stratum::always_taker};
  if (!monotonicity) c.active.push_back(Stratum::defier);
  c.reference = reference;
  c.exclusion_restriction = exclusion_restriction;
  c.monotonicity = monotonicity;
  c.validate();
  return c;
}

void StrataConfig::validate() const {
  if (active.size() < 2) throw UserError("StrataConfig: need at least 2 active strata");
  std::set<Stratum> seen(active.begin(), active.end());
  if (seen.size() != active.size())
    throw UserError("StrataConfig: duplicate active stratum");
  if (monotonicity && is_active(Stratum::defier))
    throw UserError("StrataConfig: monotonicity excludes defiers");
  if (!is_active(reference))
    throw UserError("StrataConfig: reference stratum must be active");
}

bool StrataConfig::is_active(Stratum s) const { return index_of(s) >= 0; }

int StrataConfig::index_of(Stratum s) const {
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i] == s) return static_cast<int>(i);
  return -1;
}

std::vector<Stratum> compatible_strata(int z, int d, const StrataConfig& config) {
  if ((z != 0 && z != 1) || (d != 0 && d != 1))
    throw UserError("compatible_strata: z and d must be 0/1");
  std::vector<Stratum> out;
  for (Stratum s : config.active)
    if (d_at(s, z) == d) out.push_back(s);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? "" : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_real(const std::string& s, const std::string& column, int row) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty())
    throw UserError("row " + std::to_string(row) + ": cannot parse '" + s +
                    "' in column '" + column + "'");
  return v;
}

int parse_binary(const std::string& s, const std::string& column, int row) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw UserError("row " + std::to_string(row) + ": column '" + column +
                  "' must be 0 or 1, got '" + s + "'");
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 bool standardize, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open data file: " + path);

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw UserError(path + ": missing header row");

  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i]))
      throw UserError(path + ": duplicate column '" + header[i] + "'");
    col[header[i]] = static_cast<int>(i);
  }

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw UserError(path + ": missing column '" + name + "'");
    return it->second;
  };
  const int c_time = require(schema.time);
  const int c_status = require(schema.status);
  const int c_z = require(schema.assignment);
  const int c_d = require(schema.treatment);
  const int c_id = schema.id.empty() ? -1 : require(schema.id);
  std::vector<int> c_cov;
  for (const auto& name : schema.covariates) c_cov.push_back(require(name));

  std::set<std::string> used = {schema.time, schema.status, schema.assignment,
                                schema.treatment};
  if (!schema.id.empty()) used.insert(schema.id);
  used.insert(schema.covariates.begin(), schema.covariates.end());
  for (const auto& h : header) {
    if (!used.count(h) && warnings)
      warnings->push_back("ignoring unused column '" + h + "'");
  }

  Dataset data;
  data.covariate_names = schema.covariates;
  int row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw UserError(path + ": row " + std::to_string(row) + " has " +
                      std::to_string(f.size()) + " fields, expected " +
                      std::to_string(header.size()));
    ObservedUnit u;
    u.id = c_id >= 0 ? f[c_id] : std::to_string(data.units.size());
    u.y = parse_real(f[c_time], schema.time, row);
    if (!(u.y >= 0.0) || !std::isfinite(u.y))
      throw UserError(path + ": row " + std::to_string(row) +
                      ": time must be finite and nonnegative, got " + f[c_time]);
    const int status = parse_binary(f[c_status], schema.status, row);
    u.delta = schema.status_role == CsvSchema::StatusRole::censored ? status : 1 - status;
    u.z = parse_binary(f[c_z], schema.assignment, row);
    u.d = parse_binary(f[c_d], schema.treatment, row);
    if (u.y == 0.0 && u.delta == 0)
      throw UserError(path + ": row " + std::to_string(row) +
                      ": event at time 0 is not representable; events need y > 0");
    for (int ci : c_cov) u.x.push_back(parse_real(f[ci], header[ci], row));
    data.units.push_back(std::move(u));
  }

  const std::size_t p = schema.covariates.size();
  data.standardization.assign(p, {0.0, 1.0});
  if (standardize && !data.units.empty()) {
    for (std::size_t j = 0; j < p; ++j) {
      std::set<double> distinct;
      for (const auto& u : data.units) {
        distinct.insert(u.x[j]);
        if (distinct.size() > 2) break;
      }
      if (distinct.size() <= 2) continue;  // binary (or constant): leave alone
      double mean = 0.0;
      for (const auto& u : data.units) mean += u.x[j];
      mean /= data.units.size();
      double ss = 0.0;
      for (const auto& u : data.units) ss += (u.x[j] - mean) * (u.x[j] - mean);
      const double sd = std::sqrt(ss / (data.units.size() - 1));
      if (!(sd > 0.0)) continue;
      for (auto& u : data.units) u.x[j] = (u.x[j] - mean) / sd;
      data.standardization[j] = {mean, sd};
    }
  }
  return data;
}

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& metadata_lines) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write file: " + path);
  out.precision(17);
  for (const auto& m : metadata_lines) out << "# " << m << "\n";
  out << "id,z,d,y,censored";
  for (const auto& name : data.covariate_names) out << "," << name;
  out << "\n";
  for (const auto& u : data.units) {
    out << u.id << "," << u.z << "," << u.d << "," << u.y << "," << u.delta;
    for (double v : u.x) out << "," << v;
    out << "\n";
  }
}

std::vector<Diagnostic> validate_consistency(const Dataset& data,
                                             const StrataConfig& config) {
  std::vector<Diagnostic> out;
  config.validate();

  long cell_count[2][2] = {{0, 0}, {0, 0}};
  long arm_count[2] = {0, 0};
  for (const auto& u : data.units) {
    ++cell_count[u.z][u.d];
    ++arm_count[u.z];
  }

  for (int z = 0; z < 2; ++z) {
    for (int d = 0; d < 2; ++d) {
      if (cell_count[z][d] == 0) continue;
      if (compatible_strata(z, d, config).empty()) {
        out.push_back({Diagnostic::Severity::contradiction,
                       "cell (z=" + std::to_string(z) + ", d=" + std::to_string(d) +
                           ") holds " + std::to_string(cell_count[z][d]) +
                           " units but no active stratum is compatible with it"});
      }
    }
  }
  for (int z = 0; z < 2; ++z) {
    if (arm_count[z] == 0)
      out.push_back({Diagnostic::Severity::warning,
                     "arm z=" + std::to_string(z) + " is empty"});
  }

  // Strata and (stratum, arm) cells that no observed cell can inform leave
  // their parameters at the prior; flag them.
  for (Stratum s : config.active) {
    bool stratum_seen = false;
    for (int z = 0; z < 2; ++z) {
      bool cell_seen = false;
      for (int d = 0; d < 2; ++d) {
        if (cell_count[z][d] == 0) continue;
        const auto comp = compatible_strata(z, d, config);
        if (std::find(comp.begin(), comp.end(), s) != comp.end()) {
          cell_seen = true;
          stratum_seen = true;
        }
      }
      if (!cell_seen && arm_count[z] > 0)
        out.push_back({Diagnostic::Severity::warning,
                       std::string("no data can inform stratum ") + stratum_code(s) +
                           " in arm z=" + std::to_string(z)});
    }
    if (!stratum_seen && !data.units.empty())
      out.push_back({Diagnostic::Severity::warning,
                     std::string("active stratum ") + stratum_code(s) +
                         " is compatible with no populated cell"});
  }
  return out;
}

}  // namespace stratsurv
