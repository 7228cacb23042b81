#ifndef PIS_IO_HPP
#define PIS_IO_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pis/polybasis.hpp"
#include "pis/simulate.hpp"
#include "pis/tuning.hpp"

namespace pis {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Trajectory CSV: header t,x1..xn,u1..up; the final row has empty input
/// fields (no input is applied after the last grid point).
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path.string());
  const int n = static_cast<int>(traj.states.cols());
  const int p = static_cast<int>(traj.inputs.cols());
  out << "t";
  for (int j = 0; j < n; ++j) out << ",x" << (j + 1);
  for (int j = 0; j < p; ++j) out << ",u" << (j + 1);
  out << "\n";
  for (int k = 0; k <= traj.steps(); ++k) {
    out << format_double(traj.time(k));
    for (int j = 0; j < n; ++j) out << "," << format_double(traj.states(k, j));
    for (int j = 0; j < p; ++j) {
      out << ",";
      if (k < traj.steps()) out << format_double(traj.inputs(k, j));
    }
    out << "\n";
  }
}

/// Objective-history CSV: iter,L,grad_norm,step.
inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<TuningRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_history_csv: cannot open " + path.string());
  out << "iter,L,grad_norm,step\n";
  for (const auto& rec : history)
    out << rec.iter << "," << format_double(rec.L) << "," << format_double(rec.grad_norm) << ","
        << format_double(rec.step) << "\n";
}

inline void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vector: cannot open " + path.string());
  for (int i = 0; i < v.size(); ++i) out << format_double(v[i]) << "\n";
}

inline Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_vector: cannot open " + path.string());
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  Eigen::VectorXd out(static_cast<int>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) out[static_cast<int>(i)] = vals[i];
  return out;
}

inline void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix: cannot open " + path.string());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
}

inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_matrix: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      row.push_back(std::stod(line.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

/// Key-value run-summary writer (structured text, one `key = value` per line).
class RunSummary {
 public:
  void add(const std::string& key, const std::string& value) {
    lines_.push_back(key + " = " + value);
  }
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }

  void add_basis(const std::string& key, const EvenPolyBasis& basis) {
    std::string s = "[";
    for (int i = 0; i < basis.size(); ++i) {
      if (i) s += ", ";
      s += "(";
      const auto& e = basis.terms()[i].exponents;
      for (size_t j = 0; j < e.size(); ++j) {
        if (j) s += ",";
        s += std::to_string(e[j]);
      }
      s += ")";
    }
    s += "]";
    add(key, s);
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("RunSummary: cannot open " + path.string());
    for (const auto& line : lines_) out << line << "\n";
  }

 private:
  std::vector<std::string> lines_;
};

}  // namespace pis

#endif  // PIS_IO_HPP
