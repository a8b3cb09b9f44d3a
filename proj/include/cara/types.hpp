#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace cara {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// Rows of (w, a, g0, y) handed to estimators. g0 is the probability that
/// was actually used to draw the recorded arm, i.e. g_0(a_i | C_i).
struct Dataset {
  Matrix w;            // n x d baseline covariates
  IntVector a;         // n, arms in {0,1}
  Vector g0;           // n, probability of the realized arm
  Vector y;            // n, outcome
  std::vector<int> id; // participant ids, enrollment order

  Eigen::Index size() const { return y.size(); }
  bool empty() const { return y.size() == 0; }
};

inline Dataset subset(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  out.w.resize(n, d.w.cols());
  out.a.resize(n);
  out.g0.resize(n);
  out.y.resize(n);
  out.id.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.w.row(i) = d.w.row(rows[i]);
    out.a[i] = d.a[rows[i]];
    out.g0[i] = d.g0[rows[i]];
    out.y[i] = d.y[rows[i]];
    out.id.push_back(d.id[rows[i]]);
  }
  return out;
}

struct PositivityError : std::runtime_error {
  explicit PositivityError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cara
