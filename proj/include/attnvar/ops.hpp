// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/graph.hpp"

#include <span>
#include <vector>

namespace attnvar::ad {

// Elementwise binary ops with two-sided broadcasting: shapes must match per
// dimension or one side must be 1 along that dimension.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var reciprocal(Var a);
Var square(Var a);
Var clamp_min(Var a, double floor);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);

/// Row-wise softmax with max-subtraction.
Var softmax_rows(Var a);

/// Row-wise softmax restricted to positions where `mask` is 1; masked
/// positions get exactly zero. Every row needs at least one unmasked entry.
Var masked_softmax_rows(Var a, const Mat& mask);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

Var rows(Var a, Eigen::Index r0, Eigen::Index n);
Var cols(Var a, Eigen::Index c0, Eigen::Index n);

Var sum_all(Var a);
Var mean_all(Var a);

/// Collapses rows: result is 1 x C.
Var colwise_sum(Var a);

/// Per-column maximum over rows (1 x C). The gradient flows to the first row
/// attaining the maximum in each column.
Var colwise_max(Var a);

/// Median of all entries (1 x 1). Odd count: the middle order statistic, with
/// the gradient routed to it; even count: mean of the two middle order
/// statistics, with half the gradient to each. Value ties resolve to the
/// lowest flat index.
Var median_all(Var a);

/// Selects a single entry (1 x 1).
Var pick(Var a, Eigen::Index r, Eigen::Index c);

/// Sums the entries of a 1 x N row into bins: out(0, ids[i]) += a(0, i).
Var scatter_cols(Var a, std::span<const int> ids, Eigen::Index out_cols);

} // namespace attnvar::ad
