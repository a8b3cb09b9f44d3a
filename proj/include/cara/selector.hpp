#pragma once

#include <map>

#include "cara/estimators.hpp"

namespace cara::selector {

/// Online Superlearner pick: the surrogate whose estimate has the highest
/// lower confidence bound psi_hat - z_{1-alpha/2} * se. Degenerate fits are
/// excluded; exact ties break toward the smallest k. Throws when every fit
/// is degenerate (the caller keeps its previous selection).
int select_surrogate(const std::map<int, tmle::TmleFit>& fits, double alpha);

} // namespace cara::selector
