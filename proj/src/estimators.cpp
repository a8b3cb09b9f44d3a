#include "cara/estimators.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>

#include "cara/stats.hpp"

namespace cara::tmle {

using stats::expit;
using stats::logit;

double z_quantile(double alpha) { return stats::z_quantile(alpha); }

OutcomeScaler OutcomeScaler::from_data(const Vector& y, double pad_fraction) {
  if (y.size() == 0) throw std::invalid_argument("cannot scale an empty outcome vector");
  double lo = y.minCoeff(), hi = y.maxCoeff();
  double range = hi - lo;
  if (range <= 0) range = 1.0;  // degenerate constant outcome
  return OutcomeScaler{lo - pad_fraction * range, hi + pad_fraction * range};
}

double OutcomeScaler::scale(double y) const {
  double s = (y - lo) / (hi - lo);
  return std::min(0.995, std::max(0.005, s));
}

Vector OutcomeScaler::scale(const Vector& y) const {
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = scale(y[i]);
  return out;
}

double QModel::predict(int a, const Eigen::Ref<const Vector>& w) const {
  switch (kind) {
    case LearnerKind::kArmMeans:
      return a == 1 ? mu1 : mu0;
    case LearnerKind::kLinear: {
      const Eigen::Index d = w.size();
      double v = lin_coef[0];
      for (Eigen::Index j = 0; j < d; ++j) v += lin_coef[1 + j] * w[j];
      v += lin_coef[1 + d] * a;
      for (Eigen::Index j = 0; j < d; ++j) v += lin_coef[2 + d + j] * a * w[j];
      return v;
    }
    case LearnerKind::kHalInteraction: {
      const Eigen::Index p = basis.column_count();
      double v = hal_intercept + hal_beta[p] * a;
      for (Eigen::Index j = 0; j < p; ++j) {
        double col = basis.eval_column(static_cast<int>(j), w);
        v += hal_beta[j] * col + a * hal_beta[p + 1 + j] * col;
      }
      return v;
    }
  }
  return 0.0;
}

namespace {

Matrix linear_design(const Matrix& w, const IntVector& a) {
  const Eigen::Index n = w.rows(), d = w.cols();
  Matrix x(n, 2 + 2 * d);
  x.col(0).setOnes();
  x.middleCols(1, d) = w;
  x.col(1 + d) = a.cast<double>();
  for (Eigen::Index j = 0; j < d; ++j)
    x.col(2 + d + j) = a.cast<double>().array() * w.col(j).array();
  return x;
}

Matrix hal_interaction_design(const hal::HalBasis& basis, const Matrix& w, const IntVector& a) {
  Matrix h = basis.evaluate(w);
  const Eigen::Index n = w.rows(), p = h.cols();
  Matrix x(n, 2 * p + 1);
  x.leftCols(p) = h;
  x.col(p) = a.cast<double>();
  x.rightCols(p) = a.cast<double>().asDiagonal() * h;
  return x;
}

struct ArmMeans {
  double mu0, mu1;
};

ArmMeans arm_means(const Vector& y, const IntVector& a, const std::vector<Eigen::Index>& rows) {
  double s0 = 0, s1 = 0, tot = 0;
  Eigen::Index n0 = 0, n1 = 0;
  for (Eigen::Index i : rows) {
    tot += y[i];
    if (a[i] == 1) {
      s1 += y[i];
      ++n1;
    } else {
      s0 += y[i];
      ++n0;
    }
  }
  double overall = rows.empty() ? 0.0 : tot / static_cast<double>(rows.size());
  return {n0 > 0 ? s0 / n0 : overall, n1 > 0 ? s1 / n1 : overall};
}

} // namespace

QModel fit_initial_q(const Dataset& data, const EstimatorOptions& opts) {
  if (data.size() < 2) throw std::invalid_argument("initial regression needs n >= 2");
  if (!data.y.allFinite() || !data.w.allFinite())
    throw std::invalid_argument("non-finite regression inputs");
  const Eigen::Index n = data.size();
  const int folds = std::max(2, std::min<int>(opts.q_folds, static_cast<int>(n)));

  Matrix x_lin = linear_design(data.w, data.a);
  hal::HalBasis basis = hal::build_basis(data.w, 1, opts.hal.knot_cap);
  Matrix x_hal = hal_interaction_design(basis, data.w, data.a);
  Vector unit = Vector::Ones(n);
  double lam_top = hal::lambda_max(x_hal, data.y, unit);
  Vector grid = lam_top > 0 ? hal::make_lambda_grid(lam_top, opts.hal.grid_size, opts.hal.min_ratio)
                            : Vector();

  double sse_am = 0.0, sse_lin = 0.0;
  for (int v = 0; v < folds; ++v) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (i % folds == v ? te : tr).push_back(i);
    if (tr.empty() || te.empty()) continue;
    ArmMeans am = arm_means(data.y, data.a, tr);
    Matrix xtr(tr.size(), x_lin.cols());
    Vector ytr(tr.size());
    for (size_t i = 0; i < tr.size(); ++i) {
      xtr.row(static_cast<Eigen::Index>(i)) = x_lin.row(tr[i]);
      ytr[static_cast<Eigen::Index>(i)] = data.y[tr[i]];
    }
    Vector coef = xtr.colPivHouseholderQr().solve(ytr);
    for (Eigen::Index i : te) {
      double pred_am = data.a[i] == 1 ? am.mu1 : am.mu0;
      sse_am += (data.y[i] - pred_am) * (data.y[i] - pred_am);
      double pred_lin = x_lin.row(i).dot(coef);
      sse_lin += (data.y[i] - pred_lin) * (data.y[i] - pred_lin);
    }
  }
  double sse_hal = std::numeric_limits<double>::infinity();
  Eigen::Index best_lambda = 0;
  if (grid.size() > 0) {
    Vector cv = hal::cv_path_sse(x_hal, data.y, unit, grid, folds, opts.hal);
    for (Eigen::Index l = 0; l < cv.size(); ++l)
      if (cv[l] < sse_hal) {
        sse_hal = cv[l];
        best_lambda = l;
      }
  }

  QModel q;
  // ties break toward the simpler learner
  if (sse_am <= sse_lin && sse_am <= sse_hal) {
    q.kind = LearnerKind::kArmMeans;
    std::vector<Eigen::Index> all(n);
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    ArmMeans am = arm_means(data.y, data.a, all);
    q.mu0 = am.mu0;
    q.mu1 = am.mu1;
    q.cv_mse = sse_am / static_cast<double>(n);
  } else if (sse_lin <= sse_hal) {
    q.kind = LearnerKind::kLinear;
    q.lin_coef = x_lin.colPivHouseholderQr().solve(data.y);
    q.cv_mse = sse_lin / static_cast<double>(n);
  } else {
    q.kind = LearnerKind::kHalInteraction;
    q.basis = basis;
    hal::PathResult path = hal::fit_path(x_hal, data.y, unit, grid.head(best_lambda + 1), opts.hal);
    q.hal_intercept = path.intercepts[best_lambda];
    q.hal_beta = path.betas.col(best_lambda);
    q.cv_mse = sse_hal / static_cast<double>(n);
  }
  return q;
}

FluctuationResult fluctuate(const Vector& q_scaled, const Vector& y_scaled,
                            const Vector& weights) {
  return fluctuate(q_scaled, y_scaled, weights, Vector::Ones(q_scaled.size()));
}

FluctuationResult fluctuate(const Vector& q_scaled, const Vector& y_scaled,
                            const Vector& weights, const Vector& signs) {
  const Eigen::Index n = q_scaled.size();
  if (y_scaled.size() != n || weights.size() != n || signs.size() != n)
    throw std::invalid_argument("fluctuation input length mismatch");
  if (!(weights.array() >= 0).all() || !weights.allFinite())
    throw std::invalid_argument("fluctuation weights must be nonnegative and finite");
  if (weights.sum() <= 0) throw std::invalid_argument("all fluctuation weights are zero");

  Vector offset(n);
  for (Eigen::Index i = 0; i < n; ++i) offset[i] = logit(q_scaled[i]);

  auto score = [&](double eps) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += weights[i] * signs[i] * (y_scaled[i] - expit(offset[i] + eps * signs[i]));
    return s / static_cast<double>(n);
  };
  auto fisher = [&](double eps) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double mu = expit(offset[i] + eps * signs[i]);
      f += weights[i] * mu * (1.0 - mu);
    }
    return f / static_cast<double>(n);
  };

  const double bound = 20.0;
  // score is strictly decreasing in eps, so the bracket is safe
  if (score(-bound) < 0) return {-bound, true};
  if (score(bound) > 0) return {bound, true};
  double lo = -bound, hi = bound, eps = 0.0;
  for (int it = 0; it < 200; ++it) {
    double s = score(eps);
    if (std::abs(s) <= 1e-12) return {eps, false};
    if (s > 0) lo = eps; else hi = eps;
    double f = fisher(eps);
    double next = f > 1e-300 ? eps + s / f : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    eps = next;
  }
  return {eps, std::abs(score(eps)) > 1e-10};
}

double psi_plugin(const std::function<double(int, const Eigen::Ref<const Vector>&)>& qbar,
                  const Matrix& w, const Vector& cand_p1) {
  const Eigen::Index n = w.rows();
  if (cand_p1.size() != n) throw std::invalid_argument("rule length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector wi = w.row(i).transpose();
    acc += qbar(1, wi) * cand_p1[i] + qbar(0, wi) * (1.0 - cand_p1[i]);
  }
  return acc / static_cast<double>(n);
}

namespace {

void check_positivity(const Dataset& data, const EstimatorOptions& opts) {
  const double tol = 1e-12;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double g = data.g0[i];
    if (!(g > 0.0 && g < 1.0))
      throw PositivityError("recorded assignment probability outside (0,1)");
    if (g < opts.nu - tol || g > 1.0 - opts.nu + tol)
      throw PositivityError("recorded assignment probability violates the exploration floor");
  }
}

void finish_common(TmleFit& fit, const Dataset& data, const PreparedOutcome& p, const Vector& weights,
                   const Vector& signs, const FluctuationResult& flu, double psi_raw,
                   const Vector& qstar_obs_scaled, const EstimatorOptions& opts) {
  const Eigen::Index n = data.size();
  fit.n = n;
  fit.psi_hat = psi_raw;
  fit.epsilon_hat = flu.epsilon;
  fit.initial_learner = p.q.kind;
  double resid_mean = 0.0, sigma2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    resid_mean += weights[i] * signs[i] * (p.y_scaled[i] - qstar_obs_scaled[i]);
    double raw_resid = data.y[i] - p.scaler.unscale(qstar_obs_scaled[i]);
    double term = weights[i] * signs[i] * raw_resid;
    sigma2 += term * term;
  }
  fit.eif_residual = resid_mean / static_cast<double>(n);
  fit.sigma2_hat = sigma2 / static_cast<double>(n);
  fit.se = std::sqrt(fit.sigma2_hat / static_cast<double>(n));
  double z = z_quantile(opts.alpha);
  fit.ci_lo = fit.psi_hat - z * fit.se;
  fit.ci_hi = fit.psi_hat + z * fit.se;
  fit.degenerate = flu.clamped || !std::isfinite(fit.psi_hat) || !std::isfinite(fit.se);
}

} // namespace

PreparedOutcome prepare_outcome(const Dataset& data, const EstimatorOptions& opts) {
  PreparedOutcome p;
  p.scaler = OutcomeScaler::from_data(data.y);
  p.q = fit_initial_q(data, opts);
  const Eigen::Index n = data.size();
  p.y_scaled = p.scaler.scale(data.y);
  p.q_obs.resize(n);
  p.q_arm.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector wi = data.w.row(i).transpose();
    p.q_arm(i, 0) = p.scaler.scale(p.q.predict(0, wi));
    p.q_arm(i, 1) = p.scaler.scale(p.q.predict(1, wi));
    p.q_obs[i] = p.q_arm(i, data.a[i]);
  }
  return p;
}

TmleFit tmle_psi_tk(const Dataset& data, const Vector& cand_p1, const EstimatorOptions& opts) {
  if (data.size() < 2) throw std::invalid_argument("surrogate-utility TMLE needs n >= 2");
  return tmle_psi_tk(data, prepare_outcome(data, opts), cand_p1, opts);
}

TmleFit tmle_psi_tk(const Dataset& data, const PreparedOutcome& p, const Vector& cand_p1,
                    const EstimatorOptions& opts) {
  if (data.size() < 2) throw std::invalid_argument("surrogate-utility TMLE needs n >= 2");
  if (cand_p1.size() != data.size()) throw std::invalid_argument("candidate rule length mismatch");
  check_positivity(data, opts);
  const Eigen::Index n = data.size();
  Vector weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double g_star = data.a[i] == 1 ? cand_p1[i] : 1.0 - cand_p1[i];
    weights[i] = g_star / data.g0[i];
  }
  Vector signs = Vector::Ones(n);
  FluctuationResult flu = fluctuate(p.q_obs, p.y_scaled, weights, signs);

  Vector qstar_obs(n);
  double psi_scaled = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double q1 = expit(logit(p.q_arm(i, 1)) + flu.epsilon);
    double q0 = expit(logit(p.q_arm(i, 0)) + flu.epsilon);
    qstar_obs[i] = data.a[i] == 1 ? q1 : q0;
    psi_scaled += q1 * cand_p1[i] + q0 * (1.0 - cand_p1[i]);
  }
  psi_scaled /= static_cast<double>(n);

  TmleFit fit;
  finish_common(fit, data, p, weights, signs, flu, p.scaler.unscale(psi_scaled), qstar_obs, opts);
  return fit;
}

TmleFit tmle_ate(const Dataset& data, const EstimatorOptions& opts) {
  if (data.size() < 2) throw std::invalid_argument("ATE TMLE needs n >= 2");
  check_positivity(data, opts);
  const Eigen::Index n = data.size();
  Vector weights(n), signs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    weights[i] = 1.0 / data.g0[i];
    signs[i] = 2.0 * data.a[i] - 1.0;
  }
  PreparedOutcome p = prepare_outcome(data, opts);
  FluctuationResult flu = fluctuate(p.q_obs, p.y_scaled, weights, signs);

  Vector qstar_obs(n);
  double psi_scaled = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double q1 = expit(logit(p.q_arm(i, 1)) + flu.epsilon);
    double q0 = expit(logit(p.q_arm(i, 0)) - flu.epsilon);
    qstar_obs[i] = data.a[i] == 1 ? q1 : q0;
    psi_scaled += q1 - q0;
  }
  psi_scaled /= static_cast<double>(n);

  TmleFit fit;
  // a difference of means: only the range factor survives unscaling
  double psi_raw = (p.scaler.hi - p.scaler.lo) * psi_scaled;
  finish_common(fit, data, p, weights, signs, flu, psi_raw, qstar_obs, opts);
  return fit;
}

TmleFit tmle_rule_value(const Dataset& data,
                        const std::function<int(const Eigen::Ref<const Vector>&)>& rule,
                        const EstimatorOptions& opts) {
  if (data.size() < 2) throw std::invalid_argument("rule-value TMLE needs n >= 2");
  check_positivity(data, opts);
  const Eigen::Index n = data.size();
  Vector weights(n);
  IntVector d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d[i] = rule(data.w.row(i).transpose());
    weights[i] = (data.a[i] == d[i] ? 1.0 : 0.0) / data.g0[i];
  }
  PreparedOutcome p = prepare_outcome(data, opts);
  Vector signs = Vector::Ones(n);
  FluctuationResult flu = fluctuate(p.q_obs, p.y_scaled, weights, signs);

  Vector qstar_obs(n);
  double psi_scaled = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double q1 = expit(logit(p.q_arm(i, 1)) + flu.epsilon);
    double q0 = expit(logit(p.q_arm(i, 0)) + flu.epsilon);
    qstar_obs[i] = data.a[i] == 1 ? q1 : q0;
    psi_scaled += d[i] == 1 ? q1 : q0;
  }
  psi_scaled /= static_cast<double>(n);

  TmleFit fit;
  finish_common(fit, data, p, weights, signs, flu, p.scaler.unscale(psi_scaled), qstar_obs, opts);
  return fit;
}

TmleFit cvtmle_rule_value(const Dataset& data, const RuleLearner& learner,
                          const EstimatorOptions& opts) {
  if (data.size() < 4) throw std::invalid_argument("CV-TMLE needs n >= 4");
  std::vector<Eigen::Index> even, odd;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    (data.id[i] % 2 == 0 ? even : odd).push_back(i);

  bool skipped = false;
  std::vector<TmleFit> fold_fits;
  auto run_fold = [&](const std::vector<Eigen::Index>& learn_rows,
                      const std::vector<Eigen::Index>& eval_rows) {
    if (learn_rows.size() < 2 || eval_rows.size() < 2) {
      skipped = true;
      return;
    }
    Dataset eval_data = subset(data, eval_rows);
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < eval_data.size(); ++i) (eval_data.a[i] == 1 ? has1 : has0) = true;
    if (!has0 || !has1) {
      skipped = true;
      return;
    }
    auto rule = learner(subset(data, learn_rows));
    try {
      fold_fits.push_back(tmle_rule_value(eval_data, rule, opts));
    } catch (const std::invalid_argument&) {
      skipped = true;  // e.g. the rule matched no observed arm in this fold
    }
  };
  run_fold(even, odd);
  run_fold(odd, even);
  if (fold_fits.empty()) throw std::runtime_error("both CV-TMLE folds degenerate");

  TmleFit fit;
  fit.n = data.size();
  for (const TmleFit& f : fold_fits) {
    fit.psi_hat += f.psi_hat;
    fit.sigma2_hat += f.sigma2_hat;
    fit.epsilon_hat += f.epsilon_hat;
    fit.eif_residual += f.eif_residual;
    fit.degenerate = fit.degenerate || f.degenerate;
  }
  const double m = static_cast<double>(fold_fits.size());
  fit.psi_hat /= m;
  fit.sigma2_hat /= m;
  fit.epsilon_hat /= m;
  fit.eif_residual /= m;
  fit.se = std::sqrt(fit.sigma2_hat / static_cast<double>(fit.n));
  double z = z_quantile(opts.alpha);
  fit.ci_lo = fit.psi_hat - z * fit.se;
  fit.ci_hi = fit.psi_hat + z * fit.se;
  fit.degenerate = fit.degenerate || skipped;
  return fit;
}

} // namespace cara::tmle
