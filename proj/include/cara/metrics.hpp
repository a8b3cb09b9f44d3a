#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cara/dgp.hpp"
#include "cara/trial.hpp"

namespace cara::metrics {

/// One estimand evaluation within one replicate. k = 0 denotes the fair-coin
/// (RCT) candidate design; selected_k = -1 when no selector ran.
struct RepRecord {
  std::string scenario;
  std::string design;
  int rep = 0;
  int t = 0;
  int k = 0;
  double psi_true_run = 0.0;
  double psi_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int covered = 0;
  double epsilon_hat = 0.0;
  double eif_residual = 0.0;
  int selected_k = -1;
  double regret = 0.0;
  double p_nonopt = 0.0;
};

struct AggregateRow {
  std::string scenario;
  std::string design;
  int t = 0;
  int k = 0;
  int n_reps = 0;
  double truth_mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double coverage = 0.0;
  double regret_mean = 0.0;
  double p_nonopt_mean = 0.0;
  double sel_freq = 0.0;
};

using McReport = std::vector<AggregateRow>;

/// Per-run truth: oracle conditional means plugged into the identification
/// display over the n_t = N(t-K) completed participants, using the candidate
/// rules recorded at each enrollment. k = 0 evaluates the fair-coin rules.
double per_run_truth_psi(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec,
                         int t, int k);

/// Marginal counterfactual value: runs the full design reps times via the
/// supplied runner and averages the oracle conditional mean of the final
/// outcome at the realized arms over the n_t completed participants.
double marginal_psi_oracle(const dgp::ScenarioSpec& spec, int t, int reps,
                           const std::function<trial::TrialHistory(int)>& run_design);

/// Cohort-average absolute CATE forgone at time t. NaN for an empty cohort.
double regret_at(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec, int t);

/// Fraction of the t-cohort assigned off the optimal final-outcome rule.
double prob_nonopt_at(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec, int t);

/// Aggregates per-rep records by (scenario, design, t, k). Coverage is
/// measured against each run's own truth; variance is the population
/// variance of the point estimates.
McReport aggregate(const std::vector<RepRecord>& records);

} // namespace cara::metrics
