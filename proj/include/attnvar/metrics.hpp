// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/losses.hpp"
#include "attnvar/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace attnvar::metrics {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Clipped n-gram overlap F1 over token ids; no stemming, no stopwords.
RougeScore rouge_n(std::span<const int> cand, std::span<const int> ref, int n);

/// LCS-based F1.
RougeScore rouge_l(std::span<const int> cand, std::span<const int> ref);

/// 1 - unique/total n-grams; sequences shorter than n score 0.
double duplication_rate(std::span<const int> tokens, int n);

struct AttentionStats {
    std::vector<double> step_variance;  // median-centered variance of a_t^r
    std::vector<double> step_gate_mean; // mean gate activation per step
    Mat accumulated;                    // 1 × |D|: A_i = sum_t a^r_ti
    Mat g;                              // 1 × |D|: A_i - max_t a^r_ti
};

AttentionStats attention_stats(const losses::DecodeTrace& trace, const std::vector<Mat>& gates);

struct MetricsRow {
    std::string model;
    std::string split;
    double rouge1 = 0, rouge2 = 0, rougeL = 0;
    double dup1 = 0, dup2 = 0, dup3 = 0, dup4 = 0;
    double mean_local_variance = 0;
    double mean_global_g = 0;
};

/// CSV with a fixed header; numbers rendered with six decimals.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

} // namespace attnvar::metrics
