#include "cara/randomize.hpp"

#include <cmath>

#include "cara/stats.hpp"

namespace cara::stats {

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level out of range");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

} // namespace cara::stats

namespace cara::randomize {

std::string Design::name() const {
  switch (kind) {
    case DesignKind::kRct: return "rct";
    case DesignKind::kFixedSurrogate: return "fixed" + std::to_string(fixed_k);
    case DesignKind::kSuperlearner: return "sl";
  }
  return "?";
}

Design Design::parse(const std::string& name, int outcome_count) {
  if (name == "rct") return rct();
  if (name == "sl") return superlearner();
  if (name.rfind("fixed", 0) == 0) {
    int k = std::stoi(name.substr(5));
    if (k < 1 || k > outcome_count)
      throw std::invalid_argument("design surrogate out of range: " + name);
    return fixed(k);
  }
  throw std::invalid_argument("unknown design: " + name);
}

double RuleConfig::z() const { return stats::z_quantile(alpha); }

void RuleConfig::validate() const {
  if (!(nu >= 0.0 && nu < 0.5)) throw std::invalid_argument("nu must lie in [0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

StochasticRule surrogate_rule(const SummaryMeasure& summary, int k, const RuleConfig& config) {
  StochasticRule rule;
  rule.source_k = k;
  const int idx = k - 1;
  if (idx < 0 || idx >= summary.cate.size())
    throw std::invalid_argument("surrogate index out of range");
  if (!summary.informed[idx]) {
    rule.p1 = 0.5;
    rule.informed = false;
    return rule;
  }
  rule.informed = true;
  const double cate = summary.cate[idx];
  const double se = summary.cate_se[idx];
  if (std::isinf(se)) {
    rule.p1 = 0.5;  // fully uncertain estimate
    return rule;
  }
  const double b = config.z() * se;
  if (b <= 0.0) {
    // b -> 0+ limit of h_nu: a sign rule
    rule.p1 = cate > 0 ? 1.0 - config.nu : (cate < 0 ? config.nu : 0.5);
    return rule;
  }
  rule.p1 = h_nu(cate, b, config.nu);
  return rule;
}

StochasticRule design_rule(const Design& design, const SummaryMeasure& summary,
                           std::optional<int> selected_k, int t, int outcome_count,
                           const RuleConfig& config) {
  switch (design.kind) {
    case DesignKind::kRct:
      return StochasticRule{0.5, 0, false};
    case DesignKind::kFixedSurrogate:
      if (t <= design.fixed_k) return StochasticRule{0.5, design.fixed_k, false};
      return surrogate_rule(summary, design.fixed_k, config);
    case DesignKind::kSuperlearner:
      if (t <= outcome_count) return StochasticRule{0.5, 0, false};
      if (!selected_k.has_value())
        throw std::logic_error("superlearner design needs a selected surrogate at t >= K+1");
      return surrogate_rule(summary, *selected_k, config);
  }
  throw std::logic_error("unreachable design kind");
}

} // namespace cara::randomize
