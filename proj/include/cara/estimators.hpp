#pragma once

#include <functional>
#include <string>

#include "cara/hal.hpp"
#include "cara/types.hpp"

namespace cara::tmle {

/// Maps raw outcomes into (0,1) for the logistic fluctuation:
/// (y - lo) / (hi - lo), truncated into [0.005, 0.995].
struct OutcomeScaler {
  double lo = 0.0;
  double hi = 1.0;

  static OutcomeScaler from_data(const Vector& y, double pad_fraction = 0.1);
  double scale(double y) const;
  double unscale(double s) const { return lo + (hi - lo) * s; }
  Vector scale(const Vector& y) const;
};

enum class LearnerKind { kArmMeans, kLinear, kHalInteraction };

/// Initial conditional-mean fit Qbar(a, w), chosen by V-fold CV among
/// arm-wise intercepts, a main-terms + interaction linear model, and
/// first-order HAL on w with arm interaction columns. Ties go to the
/// simpler learner, in that order.
struct QModel {
  LearnerKind kind = LearnerKind::kArmMeans;
  double mu0 = 0.0, mu1 = 0.0;          // arm means
  Vector lin_coef;                      // over [1, w, a, a*w]
  hal::HalBasis basis;                  // hinges on w (HAL learner)
  double hal_intercept = 0.0;
  Vector hal_beta;                      // over [hinges, a, a*hinges]
  double cv_mse = 0.0;

  double predict(int a, const Eigen::Ref<const Vector>& w) const;
};

struct EstimatorOptions {
  double alpha = 0.05;
  double nu = 0.1;          // positivity bound the recorded design must respect
  int q_folds = 5;
  hal::FitOptions hal;
};

QModel fit_initial_q(const Dataset& data, const EstimatorOptions& opts);

struct FluctuationResult {
  double epsilon = 0.0;
  bool clamped = false;
};

/// One-dimensional logistic fluctuation with offset logit(q): maximizes the
/// weighted quasi-binomial likelihood of scaled outcomes, i.e. drives
/// sum_i weight_i sign_i (y_i - expit(logit(q_i) + eps * sign_i)) to zero.
/// epsilon is clamped to [-20, 20]; the clamp sets the degeneracy flag.
FluctuationResult fluctuate(const Vector& q_scaled, const Vector& y_scaled,
                            const Vector& weights, const Vector& signs);
FluctuationResult fluctuate(const Vector& q_scaled, const Vector& y_scaled,
                            const Vector& weights);

/// Targeted estimate bundle. psi_hat, sigma2_hat, se and the CI live on the
/// raw outcome scale; eif_residual is the post-fluctuation weighted residual
/// mean on the scaled scale.
struct TmleFit {
  double psi_hat = 0.0;
  double epsilon_hat = 0.0;
  double eif_residual = 0.0;
  double sigma2_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Eigen::Index n = 0;
  bool degenerate = false;
  LearnerKind initial_learner = LearnerKind::kArmMeans;
};

/// Plug-in mean under per-row candidate rules: (1/n) sum_i sum_a
/// qbar(a, w_i) * g_i(a), with g_i(1) = cand_p1[i].
double psi_plugin(const std::function<double(int, const Eigen::Ref<const Vector>&)>& qbar,
                  const Matrix& w, const Vector& cand_p1);

/// Scaled outcome plus initial conditional-mean predictions, shared by the
/// per-surrogate targeting steps at one time point.
struct PreparedOutcome {
  OutcomeScaler scaler;
  QModel q;
  Vector y_scaled;
  Vector q_obs;   // scaled initial predictions at the realized arm
  Matrix q_arm;   // n x 2 scaled initial predictions per arm
};

PreparedOutcome prepare_outcome(const Dataset& data, const EstimatorOptions& opts);

/// Surrogate-utility TMLE: weights g*_i(a_i)/g0_i(a_i), logistic
/// fluctuation on the scaled outcome, plug-in over both arms under the
/// candidate rules, martingale variance from the squared weighted
/// residuals.
TmleFit tmle_psi_tk(const Dataset& data, const Vector& cand_p1, const EstimatorOptions& opts);
TmleFit tmle_psi_tk(const Dataset& data, const PreparedOutcome& prep, const Vector& cand_p1,
                    const EstimatorOptions& opts);

/// Average treatment effect TMLE with clever weights (2a-1)/g0.
TmleFit tmle_ate(const Dataset& data, const EstimatorOptions& opts);

/// Mean outcome under a deterministic rule d: weights 1(a_i = d(w_i))/g0.
TmleFit tmle_rule_value(const Dataset& data,
                        const std::function<int(const Eigen::Ref<const Vector>&)>& rule,
                        const EstimatorOptions& opts);

using RuleLearner = std::function<std::function<int(const Eigen::Ref<const Vector>&)>(const Dataset&)>;

/// 2-fold CV-TMLE for the value of a learned rule: split by participant id
/// parity, learn the rule on one fold, evaluate on the other, average.
/// A fold whose evaluation half has a single arm is skipped and the result
/// flagged degenerate (low-quality).
TmleFit cvtmle_rule_value(const Dataset& data, const RuleLearner& learner,
                          const EstimatorOptions& opts);

/// z_{1 - alpha/2}.
double z_quantile(double alpha);

} // namespace cara::tmle
