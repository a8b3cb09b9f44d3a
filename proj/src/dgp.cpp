#include "cara/dgp.hpp"

#include <cmath>
#include <vector>

namespace cara::dgp {

namespace {

template <typename Scalar>
inline Scalar logistic(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

// Gauss-Legendre nodes/weights on [-1,1], computed once by Newton iteration.
struct GaussLegendre {
  std::vector<double> node, weight;
  explicit GaussLegendre(int n) : node(n), weight(n) {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
          double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      node[i] = x;
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

const GaussLegendre& gl64() {
  static const GaussLegendre g(64);
  return g;
}

template <typename F>
double integrate_segment(F&& f, double lo, double hi) {
  const auto& g = gl64();
  double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  double acc = 0.0;
  for (size_t i = 0; i < g.node.size(); ++i) acc += g.weight[i] * f(mid + half * g.node[i]);
  return acc * half;
}

// Integrates f over [lo, hi] splitting at sign changes of s (so kinks in f
// at roots of s do not degrade the quadrature).
template <typename F, typename S>
double integrate_split_at_roots(F&& f, S&& s, double lo, double hi) {
  const int scan = 512;
  std::vector<double> cuts{lo};
  double prev_x = lo, prev_s = s(lo);
  for (int i = 1; i <= scan; ++i) {
    double x = lo + (hi - lo) * i / scan;
    double sx = s(x);
    if ((prev_s > 0) != (sx > 0)) {
      double a = prev_x, b = x;
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + b);
        if ((s(a) > 0) != (s(m) > 0)) b = m; else a = m;
      }
      cuts.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_s = sx;
  }
  cuts.push_back(hi);
  double acc = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) acc += integrate_segment(f, cuts[i], cuts[i + 1]);
  return acc;
}

} // namespace

ScenarioSpec ScenarioSpec::scenario1(int K) {
  ScenarioSpec s;
  s.kind = ScenarioKind::kLogisticShift;
  s.outcome_count = K;
  return s;
}

ScenarioSpec ScenarioSpec::scenario2() {
  ScenarioSpec s;
  s.kind = ScenarioKind::kLogisticSlope;
  s.outcome_count = 5;
  s.gamma = Vector(5);
  s.gamma << 3.0, 2.0, 1.0, 0.5, 0.25;
  return s;
}

void ScenarioSpec::validate() const {
  if (outcome_count < 1) throw std::invalid_argument("outcome_count must be >= 1");
  if (covariate_dim < 1) throw std::invalid_argument("covariate_dim must be >= 1");
  if (!(w_high >= w_low)) throw std::invalid_argument("baseline range inverted");
  if (!std::isfinite(noise_sd) || noise_sd < 0) throw std::invalid_argument("noise_sd must be finite and >= 0");
  if (kind == ScenarioKind::kLogisticSlope && gamma.size() != outcome_count)
    throw std::invalid_argument("gamma must have one slope per outcome");
  if (kind == ScenarioKind::kGlmTable) {
    if (static_cast<int>(glm.size()) != outcome_count)
      throw std::invalid_argument("glm table must have one row per outcome");
    for (const auto& r : glm)
      if (r.main.size() != covariate_dim + 1 || r.inter.size() != covariate_dim + 1)
        throw std::invalid_argument("glm coefficient length must be 1 + covariate_dim");
  }
}

Vector sample_baseline(const ScenarioSpec& spec, RngStream& rng) {
  Vector w(spec.covariate_dim);
  for (int j = 0; j < spec.covariate_dim; ++j) w[j] = rng.uniform(spec.w_low, spec.w_high);
  return w;
}

double cond_mean(const ScenarioSpec& spec, int k, int a, const Vector& w) {
  if (k < 1 || k > spec.outcome_count) throw std::invalid_argument("outcome index out of range");
  const double sign = 2.0 * a - 1.0;
  switch (spec.kind) {
    case ScenarioKind::kLogisticShift:
      return sign * (0.5 - logistic((3.0 - k) + w[0]));
    case ScenarioKind::kLogisticSlope:
      return sign * (0.5 - logistic(spec.gamma[k - 1] * w[0]));
    case ScenarioKind::kGlmTable: {
      const GlmRow& r = spec.glm[k - 1];
      double main = r.main[0], inter = r.inter[0];
      for (int j = 0; j < spec.covariate_dim; ++j) {
        main += r.main[j + 1] * w[j];
        inter += r.inter[j + 1] * w[j];
      }
      return main + a * inter;
    }
  }
  return 0.0;
}

Vector sample_outcomes(const ScenarioSpec& spec, int a, const Vector& w, RngStream& rng) {
  Vector y(spec.outcome_count);
  for (int k = 1; k <= spec.outcome_count; ++k)
    y[k - 1] = cond_mean(spec, k, a, w) + spec.noise_sd * rng.normal();
  return y;
}

double true_cate(const ScenarioSpec& spec, int k, const Vector& w) {
  return cond_mean(spec, k, 1, w) - cond_mean(spec, k, 0, w);
}

int optimal_rule(const ScenarioSpec& spec, int k, const Vector& w) {
  return true_cate(spec, k, w) > 0.0 ? 1 : 0;
}

double true_ate(const ScenarioSpec& spec, int k) {
  if (spec.kind == ScenarioKind::kGlmTable) {
    // CATE is linear in w, so the mean plugs in E[W] exactly.
    const GlmRow& r = spec.glm[k - 1];
    double v = r.inter[0];
    double mid = 0.5 * (spec.w_low + spec.w_high);
    for (int j = 0; j < spec.covariate_dim; ++j) v += r.inter[j + 1] * mid;
    return v;
  }
  const double lo = spec.w_low, hi = spec.w_high;
  if (hi == lo) {
    Vector w = Vector::Constant(1, lo);
    return true_cate(spec, k, w);
  }
  auto f = [&](double x) {
    Vector w = Vector::Constant(1, x);
    return true_cate(spec, k, w);
  };
  return integrate_segment(f, lo, hi) / (hi - lo);
}

double true_rule_value(const ScenarioSpec& spec, int k) {
  if (spec.covariate_dim != 1)
    throw std::invalid_argument("true_rule_value implemented for scalar baselines only");
  const double lo = spec.w_low, hi = spec.w_high;
  auto value = [&](double x) {
    Vector w = Vector::Constant(1, x);
    return cond_mean(spec, k, optimal_rule(spec, k, w), w);
  };
  auto cate = [&](double x) {
    Vector w = Vector::Constant(1, x);
    return true_cate(spec, k, w);
  };
  if (hi == lo) return value(lo);
  return integrate_split_at_roots(value, cate, lo, hi) / (hi - lo);
}

} // namespace cara::dgp
