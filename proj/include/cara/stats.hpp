#pragma once

#include <cmath>
#include <stdexcept>

namespace cara::stats {

template <typename Scalar>
inline Scalar expit(Scalar z) {
  if (z >= Scalar(0)) {
    Scalar e = std::exp(-z);
    return Scalar(1) / (Scalar(1) + e);
  }
  Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
inline Scalar logit(Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) throw std::invalid_argument("logit domain violation");
  return std::log(p / (Scalar(1) - p));
}

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement against erfc; full double precision).
double inverse_normal_cdf(double p);

/// z_{1 - alpha/2}.
inline double z_quantile(double alpha) { return inverse_normal_cdf(1.0 - alpha / 2.0); }

} // namespace cara::stats
