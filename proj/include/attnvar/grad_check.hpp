// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/graph.hpp"

#include <functional>
#include <span>

namespace attnvar::ad {

/// Compares reverse-mode gradients against central finite differences.
///
/// `eval(true)` must run a full forward+backward pass over the current
/// parameter values, accumulating gradients into `params` (which arrive
/// zeroed). `eval(false)` must return the same scalar as a pure forward
/// evaluation. `eval` must be deterministic.
///
/// Returns the worst error over all coordinates:
/// |analytic - central| / max(|analytic|, |central|, 1e-12), except that
/// coordinates where both sides are below 1e-7 are compared absolutely.
double grad_check(const std::function<double(bool)>& eval, std::span<Parameter* const> params,
                  double step);

} // namespace attnvar::ad
