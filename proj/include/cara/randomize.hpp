#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cara/types.hpp"

namespace cara::randomize {

enum class DesignKind { kRct, kFixedSurrogate, kSuperlearner };

struct Design {
  DesignKind kind = DesignKind::kRct;
  int fixed_k = 0;  // surrogate index for kFixedSurrogate

  static Design rct() { return {DesignKind::kRct, 0}; }
  static Design fixed(int k) { return {DesignKind::kFixedSurrogate, k}; }
  static Design superlearner() { return {DesignKind::kSuperlearner, 0}; }

  std::string name() const;
  static Design parse(const std::string& name, int outcome_count);
};

struct RuleConfig {
  double nu = 0.1;      // exploration floor; assignment probs stay in [nu, 1-nu]
  double alpha = 0.05;  // CI level behind the z multiplier

  double z() const;     // z_{1-alpha/2}
  void validate() const;
};

/// Per-participant treatment probability pair with provenance.
struct StochasticRule {
  double p1 = 0.5;
  int source_k = 0;      // 0 means "none" (fair coin)
  bool informed = false;

  double p0() const { return 1.0 - p1; }
  double prob(int arm) const { return arm == 1 ? p1 : 1.0 - p1; }
};

/// CATE estimate and its uncertainty for each candidate surrogate, plus the
/// participant's baseline covariates. Uninformed entries force a fair coin.
struct SummaryMeasure {
  Vector w;
  Vector cate;      // B_{n,k}(w) per surrogate
  Vector cate_se;   // tau_{n,k}(w) per surrogate; +inf marks an unusable SE
  std::vector<bool> informed;
};

/// Exploration/exploitation map: nu for x <= -b, 1-nu for x >= b, and the
/// monotone Hermite cubic 1/2 + (1/2-nu)(3x/(2b) - x^3/(2b^3)) in between
/// (value nu at -b, 1-nu at b, zero slope at both ends).
template <typename Scalar>
Scalar h_nu(Scalar x, Scalar b, Scalar nu) {
  if (!(b > Scalar(0))) throw std::invalid_argument("h_nu requires b > 0");
  if (x <= -b) return nu;
  if (x >= b) return Scalar(1) - nu;
  Scalar t = x / b;
  return Scalar(0.5) + (Scalar(0.5) - nu) * (Scalar(1.5) * t - Scalar(0.5) * t * t * t);
}

/// Rule tailored to surrogate k from its CATE summary. Uninformed -> fair
/// coin. Degenerate tau = 0 collapses to the b -> 0+ limit of h_nu (a sign
/// rule); an infinite tau means fully uncertain, also a fair coin.
StochasticRule surrogate_rule(const SummaryMeasure& summary, int k, const RuleConfig& config);

/// The assignment rule the design actually uses at time t. selected_k must
/// be present for the superlearner design once t >= K+1.
StochasticRule design_rule(const Design& design, const SummaryMeasure& summary,
                           std::optional<int> selected_k, int t, int outcome_count,
                           const RuleConfig& config);

} // namespace cara::randomize
