#include "cara/cate.hpp"

#include <cmath>

namespace cara::cate {

double pseudo_outcome(double y, int a, double qbar1, double qbar0, double p1) {
  double g_realized = a == 1 ? p1 : 1.0 - p1;
  if (!(g_realized > 0.0 && g_realized < 1.0))
    throw PositivityError("pseudo-outcome requires an assignment probability inside (0,1)");
  double qbar_a = a == 1 ? qbar1 : qbar0;
  return (2.0 * a - 1.0) / g_realized * (y - qbar_a) + qbar1 - qbar0;
}

CateModel fit_cate(const Dataset& data, const tmle::EstimatorOptions& opts, int k, int fitted_at) {
  if (data.empty()) throw std::invalid_argument("cannot fit a CATE model on empty data");
  const Eigen::Index n = data.size();

  Vector eta(n);
  if (n == 1) {
    // no room for a regression fit; pseudo-outcome with qbar = 0
    eta[0] = pseudo_outcome(data.y[0], data.a[0], 0.0, 0.0,
                            data.a[0] == 1 ? data.g0[0] : 1.0 - data.g0[0]);
  } else {
    tmle::QModel q = tmle::fit_initial_q(data, opts);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector wi = data.w.row(i).transpose();
      double p1 = data.a[i] == 1 ? data.g0[i] : 1.0 - data.g0[i];
      eta[i] = pseudo_outcome(data.y[i], data.a[i], q.predict(1, wi), q.predict(0, wi), p1);
    }
  }

  CateModel model;
  model.k = k;
  model.n_used = n;
  model.fitted_at = fitted_at;
  hal::HalBasis basis = hal::build_basis(data.w, 1, opts.hal.knot_cap);
  model.fit = hal::cv_select(basis, data.w, eta, Vector::Ones(n), opts.hal);
  return model;
}

std::pair<double, double> cate_at(const CateModel& model, const Eigen::Ref<const Vector>& w) {
  Matrix x(1, w.size());
  x.row(0) = w.transpose();
  double b = hal::predict(model.fit, x)[0];
  double tau = hal::pointwise_se(model.fit, x)[0];
  return {b, tau};
}

} // namespace cara::cate
