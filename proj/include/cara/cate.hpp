#pragma once

#include "cara/estimators.hpp"
#include "cara/hal.hpp"
#include "cara/types.hpp"

namespace cara::cate {

/// Doubly-robust CATE model for one surrogate: pseudo-outcomes regressed on
/// baseline covariates with first-order HAL.
struct CateModel {
  int k = 0;
  hal::HalFit fit;
  Eigen::Index n_used = 0;
  int fitted_at = 0;
};

/// eta = (2a-1)/g(a|w) * (y - qbar_a) + qbar1 - qbar0, with
/// g(1|w) = p1 and g(0|w) = 1 - p1. Throws PositivityError at p1 in {0,1}.
double pseudo_outcome(double y, int a, double qbar1, double qbar0, double p1);

/// Builds pseudo-outcomes with the recorded per-row assignment probability
/// (known by design) and an initial conditional-mean fit from the discrete
/// learner stack, then runs first-order HAL with CV-selected penalty on
/// (W, eta) with unit weights.
CateModel fit_cate(const Dataset& data, const tmle::EstimatorOptions& opts, int k = 0,
                   int fitted_at = 0);

/// Point estimate and delta-method SE at w. The SE comes back +infinity when
/// the working covariance was flagged unusable.
std::pair<double, double> cate_at(const CateModel& model, const Eigen::Ref<const Vector>& w);

} // namespace cara::cate
