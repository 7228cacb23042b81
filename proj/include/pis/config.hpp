#ifndef PIS_CONFIG_HPP
#define PIS_CONFIG_HPP

#include <Eigen/Dense>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pis/dynamics.hpp"
#include "pis/nominal.hpp"
#include "pis/objective.hpp"
#include "pis/tuning.hpp"

namespace pis {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal TOML reader covering the subset the experiment configs use:
/// comments, [table] headers, and single-line `key = value` entries with
/// string, boolean, number, array, and array-of-array values. Keys are
/// flattened to "table.key".
class TomlTable {
 public:
  using Value = std::variant<std::string, bool, double, std::vector<double>,
                             std::vector<std::vector<double>>>;

  static TomlTable parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static TomlTable parse(const std::string& text, const std::string& origin = "<string>") {
    TomlTable table;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip_comment(line);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed table header");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string val = trim(s.substr(eq + 1));
      if (key.empty() || val.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
      std::string full = section.empty() ? key : section + "." + key;
      table.values_[full] = parse_value(val, origin, lineno);
    }
    return table;
  }

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    return std::get<std::string>(require(key, "string"));
  }
  bool get_bool(const std::string& key) const { return std::get<bool>(require(key, "bool")); }
  double get_double(const std::string& key) const {
    return std::get<double>(require(key, "number"));
  }
  int get_int(const std::string& key) const {
    return static_cast<int>(std::get<double>(require(key, "number")));
  }
  std::vector<double> get_array(const std::string& key) const {
    return std::get<std::vector<double>>(require(key, "array"));
  }
  std::vector<std::vector<double>> get_matrix(const std::string& key) const {
    return std::get<std::vector<std::vector<double>>>(require(key, "array of arrays"));
  }

  double get_double_or(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
  }
  int get_int_or(const std::string& key, int fallback) const {
    return contains(key) ? get_int(key) : fallback;
  }
  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
  }

  Eigen::VectorXd get_vector(const std::string& key) const {
    auto a = get_array(key);
    Eigen::VectorXd v(static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i];
    return v;
  }

  Eigen::MatrixXd get_eigen_matrix(const std::string& key) const {
    auto rows = get_matrix(key);
    if (rows.empty()) throw ConfigError("empty matrix for key: " + key);
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) throw ConfigError("ragged matrix for key: " + key);
      for (size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return m;
  }

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  const Value& require(const std::string& key, const std::string& kind) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config field: " + key);
    return it->second;  // bad_variant_access surfaces a wrong-typed field
    (void)kind;
  }

  static std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_str = !in_str;
      if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
  }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static std::vector<std::string> split_top_level(const std::string& inner) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : inner) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty()) parts.push_back(trim(cur));
    return parts;
  }

  static Value parse_value(const std::string& val, const std::string& origin, int lineno) {
    auto fail = [&](const std::string& why) -> ConfigError {
      return ConfigError(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"') throw fail("unterminated string");
      return val.substr(1, val.size() - 2);
    }
    if (val == "true") return true;
    if (val == "false") return false;
    if (val.front() == '[') {
      if (val.back() != ']') throw fail("unterminated array (arrays must be single-line)");
      std::string inner = trim(val.substr(1, val.size() - 2));
      if (inner.empty()) return std::vector<double>{};
      auto parts = split_top_level(inner);
      if (!parts.empty() && parts[0].front() == '[') {
        std::vector<std::vector<double>> rows;
        for (const auto& part : parts) {
          if (part.front() != '[' || part.back() != ']') throw fail("malformed nested array");
          std::vector<double> row;
          for (const auto& e : split_top_level(trim(part.substr(1, part.size() - 2))))
            row.push_back(parse_number(e, fail));
          rows.push_back(std::move(row));
        }
        return rows;
      }
      std::vector<double> arr;
      for (const auto& part : parts) arr.push_back(parse_number(part, fail));
      return arr;
    }
    return parse_number(val, fail);
  }

  template <typename Fail>
  static double parse_number(const std::string& s, Fail&& fail) {
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw fail("not a number: '" + s + "'");
    }
  }

  std::map<std::string, Value> values_;
};

/// Fully resolved experiment configuration. (config, seed) determines every
/// output byte.
struct RunConfig {
  std::string system_name;
  ControlAffineSystem system;
  CartPoleParams cartpole_params;

  StateCost cost;
  ControlWeight weight{Eigen::MatrixXd::Identity(1, 1)};

  int m_degree = 4;
  int h_degree = 4;
  int value_degree = 4;

  Eigen::VectorXd domain_lower, domain_upper;
  int collocation_samples = 2000;

  OvershootPenalty penalty;
  AggregationMode mode = AggregationMode::Sum;

  TuningConfig tuning;
  std::vector<Eigen::VectorXd> explicit_ics;
  int ic_count = 0;  // >0: sample ic_count points uniformly in [ic_lower, ic_upper]
  Eigen::VectorXd ic_lower, ic_upper;

  Eigen::VectorXd nominal_x0;  // rollout initial condition for nominal/compare
  int pi_samples = 2000;
  double pi_tol = 1e-9;
  int pi_max_iter = 30;
  double care_tol = 1e-8;

  std::vector<double> verify_epsilons{0.05, 0.5, 2.0};
  double verify_horizon = 30.0;
  double iss_amplitude = 0.5;
  double iss_active_until = 25.0;
  double iss_horizon = 50.0;
};

inline RunConfig load_run_config(const std::string& path, std::uint64_t seed) {
  TomlTable t = TomlTable::parse_file(path);
  RunConfig cfg;

  cfg.system_name = t.get_string("system.name");
  if (cfg.system_name == "lti3") {
    cfg.system = make_lti3(t.get_double_or("system.omega_n", 2.0),
                           t.get_double_or("system.zeta", 0.1));
  } else if (cfg.system_name == "cartpole") {
    cfg.cartpole_params.m_c = t.get_double_or("system.m_c", 1.0);
    cfg.cartpole_params.m_p = t.get_double_or("system.m_p", 0.1);
    cfg.cartpole_params.l = t.get_double_or("system.l", 0.5);
    cfg.cartpole_params.grav = t.get_double_or("system.grav", 9.81);
    cfg.system = make_cartpole(cfg.cartpole_params);
  } else {
    throw ConfigError("system.name must be \"lti3\" or \"cartpole\", got: " + cfg.system_name);
  }
  const int n = cfg.system.n;

  if (t.contains("cost.Q")) {
    cfg.cost.Q = t.get_eigen_matrix("cost.Q");
    if (cfg.cost.Q.rows() != n || cfg.cost.Q.cols() != n)
      throw ConfigError("cost.Q has wrong dimensions for system state size");
  } else {
    cfg.cost.Q = Eigen::MatrixXd::Identity(n, n);
  }
  if (!t.contains("cost.R")) throw ConfigError("missing config field: cost.R");
  cfg.weight = ControlWeight(t.get_eigen_matrix("cost.R"));
  if (cfg.weight.R.rows() != cfg.system.p)
    throw ConfigError("cost.R has wrong dimensions for system input size");

  cfg.m_degree = t.get_int_or("basis.m_degree", 4);
  cfg.h_degree = t.get_int_or("basis.h_degree", 4);
  cfg.value_degree = t.get_int_or("basis.value_degree", 4);

  cfg.domain_lower = t.get_vector("domain.lower");
  cfg.domain_upper = t.get_vector("domain.upper");
  if (cfg.domain_lower.size() != n || cfg.domain_upper.size() != n)
    throw ConfigError("domain bounds have wrong dimension");
  cfg.collocation_samples = t.get_int_or("domain.K", 2000);

  cfg.penalty.component = t.get_int("objective.component");
  cfg.penalty.threshold = t.get_double("objective.threshold");
  cfg.penalty.beta = t.get_double_or("objective.beta", 10.0);
  std::string mode = t.get_string_or("objective.mode", "sum");
  if (mode == "sum")
    cfg.mode = AggregationMode::Sum;
  else if (mode == "mean")
    cfg.mode = AggregationMode::Mean;
  else
    throw ConfigError("objective.mode must be \"sum\" or \"mean\"");

  cfg.tuning.gamma = t.get_double_or("tuning.gamma", 0.05);
  cfg.tuning.max_iter = t.get_int_or("tuning.max_iter", 50);
  cfg.tuning.grad_tol = t.get_double_or("tuning.grad_tol", 1e-8);
  cfg.tuning.dt = t.get_double_or("tuning.dt", cfg.system_name == "cartpole" ? 0.005 : 0.01);
  cfg.tuning.horizon = t.get_double_or("tuning.horizon", 15.0);
  cfg.tuning.mode = cfg.mode;
  std::string rule = t.get_string_or("tuning.step_rule", "normalized");
  if (rule == "fixed")
    cfg.tuning.step_rule = StepRule::Fixed;
  else if (rule == "normalized")
    cfg.tuning.step_rule = StepRule::Normalized;
  else if (rule == "backtracking")
    cfg.tuning.step_rule = StepRule::Backtracking;
  else
    throw ConfigError("tuning.step_rule must be fixed | normalized | backtracking");

  if (t.contains("tuning.initial_conditions")) {
    for (const auto& row : t.get_matrix("tuning.initial_conditions")) {
      Eigen::VectorXd x0(static_cast<int>(row.size()));
      for (size_t j = 0; j < row.size(); ++j) x0[static_cast<int>(j)] = row[j];
      if (x0.size() != n) throw ConfigError("tuning.initial_conditions row has wrong dimension");
      cfg.explicit_ics.push_back(std::move(x0));
    }
  }
  if (t.contains("tuning.ic_count")) {
    cfg.ic_count = t.get_int("tuning.ic_count");
    cfg.ic_lower = t.get_vector("tuning.ic_lower");
    cfg.ic_upper = t.get_vector("tuning.ic_upper");
    if (cfg.ic_lower.size() != n || cfg.ic_upper.size() != n)
      throw ConfigError("tuning.ic bounds have wrong dimension");
  }
  if (cfg.explicit_ics.empty() && cfg.ic_count == 0)
    throw ConfigError("config must list tuning.initial_conditions or tuning.ic_count");

  // Resolve the initial-condition set now so later stages are deterministic.
  cfg.tuning.initial_conditions = cfg.explicit_ics;
  if (cfg.ic_count > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < cfg.ic_count; ++i) {
      Eigen::VectorXd x0(n);
      for (int j = 0; j < n; ++j)
        x0[j] = cfg.ic_lower[j] + unit(rng) * (cfg.ic_upper[j] - cfg.ic_lower[j]);
      cfg.tuning.initial_conditions.push_back(std::move(x0));
    }
  }

  if (t.contains("nominal.x0"))
    cfg.nominal_x0 = t.get_vector("nominal.x0");
  else
    cfg.nominal_x0 = cfg.tuning.initial_conditions.front();
  if (cfg.nominal_x0.size() != n) throw ConfigError("nominal.x0 has wrong dimension");
  cfg.pi_samples = t.get_int_or("nominal.K", 2000);
  cfg.pi_tol = t.get_double_or("nominal.tol", 1e-9);
  cfg.pi_max_iter = t.get_int_or("nominal.max_iter", 30);
  cfg.care_tol = t.get_double_or("nominal.care_tol", 1e-8);

  if (t.contains("verify.epsilons")) cfg.verify_epsilons = t.get_array("verify.epsilons");
  cfg.verify_horizon = t.get_double_or("verify.horizon", 30.0);
  cfg.iss_amplitude = t.get_double_or("verify.iss_amplitude", 0.5);
  cfg.iss_active_until = t.get_double_or("verify.iss_active_until", 25.0);
  cfg.iss_horizon = t.get_double_or("verify.iss_horizon", 50.0);

  return cfg;
}

}  // namespace pis

#endif  // PIS_CONFIG_HPP
