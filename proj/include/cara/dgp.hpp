#pragma once

#include "cara/rng.hpp"
#include "cara/types.hpp"

namespace cara::dgp {

enum class ScenarioKind { kLogisticShift, kLogisticSlope, kGlmTable };

/// One outcome's linear predictor for the GLM-table kind:
/// E[Y|A,W] = main . [1, w] + a * inter . [1, w].
struct GlmRow {
  Vector main;  // length 1 + covariate_dim
  Vector inter; // length 1 + covariate_dim
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kLogisticShift;
  int outcome_count = 5;       // K
  Vector gamma;                // slope per outcome (kLogisticSlope)
  double noise_sd = 1.0;
  double w_low = -4.0;
  double w_high = 4.0;
  int covariate_dim = 1;
  std::vector<GlmRow> glm;     // per outcome (kGlmTable)

  static ScenarioSpec scenario1(int K = 5);
  static ScenarioSpec scenario2();
  void validate() const;
};

Vector sample_baseline(const ScenarioSpec& spec, RngStream& rng);

/// True conditional mean E[Y_k | A=a, W=w], k in 1..K.
double cond_mean(const ScenarioSpec& spec, int k, int a, const Vector& w);

/// All K outcomes for one (a, w): cond_mean plus independent Gaussian noise.
Vector sample_outcomes(const ScenarioSpec& spec, int a, const Vector& w, RngStream& rng);

/// True CATE B_{0,k}(w) = E[Y_k|1,w] - E[Y_k|0,w].
double true_cate(const ScenarioSpec& spec, int k, const Vector& w);

/// d_{0,k}(w) = 1(true_cate > 0); ties go to arm 0.
int optimal_rule(const ScenarioSpec& spec, int k, const Vector& w);

/// E_W[B_{0,k}(W)] over the uniform baseline law. Quadrature error < 1e-8.
double true_ate(const ScenarioSpec& spec, int k);

/// E_W[Q_{0,k}(d_{0,k}(W), W)]: mean of Y_k under its own optimal rule.
double true_rule_value(const ScenarioSpec& spec, int k);

} // namespace cara::dgp
