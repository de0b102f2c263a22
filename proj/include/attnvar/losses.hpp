// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/graph.hpp"
#include "attnvar/ops.hpp"

#include <span>
#include <vector>

namespace attnvar::losses {

/// One decoded (or teacher-forced) example: per-step unnormalized refined
/// attention rows a_t^r, each 1 × |D|, plus the log-probability the model
/// assigned to the gold token at each step.
struct DecodeTrace {
    std::vector<Mat> refined;
    std::vector<double> gold_logp;

    std::size_t steps() const { return refined.size(); }
    Eigen::Index source_len() const { return refined.empty() ? 0 : refined.front().cols(); }
};

struct LossBreakdown {
    double mle = 0.0;
    double local = 0.0;
    double global = 0.0;
    double mixed = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// Odd length: middle order statistic. Even length: mean of the two middles.
double median(std::vector<double> values);

/// Population variance of a single attention row around its median.
double variance_around_median(const Mat& row);

/// g_i = sum_t a^r_ti - max_t a^r_ti over a stack of per-step rows (1 × |D|).
Mat global_g(const std::vector<Mat>& refined);

// Graph builders. Each refined row is 1 × |D| on a shared graph; gold_probs
// are 1×1 probabilities of the gold token (clamped at 1e-12 before log).
ad::Var local_variance_loss(std::span<const ad::Var> refined, double eps);
ad::Var global_variance_loss(std::span<const ad::Var> refined);
ad::Var mle_loss(std::span<const ad::Var> gold_probs);

struct LossNodes {
    ad::Var mle;
    ad::Var local;
    ad::Var global;
    ad::Var mixed; // mle + (lambda1*local + lambda2*global)
};
LossNodes mixed_loss(std::span<const ad::Var> gold_probs, std::span<const ad::Var> refined,
                     double lambda1, double lambda2, double eps);

// Numeric evaluations routed through the same graph builders on constants,
// so reported numbers match training arithmetic bit for bit.
double local_variance_value(const DecodeTrace& trace, double eps);
double global_variance_value(const DecodeTrace& trace);
double mle_value(const DecodeTrace& trace);
LossBreakdown mixed_value(const DecodeTrace& trace, double lambda1, double lambda2, double eps);

} // namespace attnvar::losses
