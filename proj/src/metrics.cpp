// SPDX-License-Identifier: Apache-2.0
#include "attnvar/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace attnvar::metrics {

namespace {

using Gram = std::vector<int>;

std::map<Gram, int> gram_counts(std::span<const int> tokens, int n) {
    std::map<Gram, int> counts;
    if (static_cast<int>(tokens.size()) >= n)
        for (std::size_t i = 0; i + n <= tokens.size(); ++i)
            ++counts[Gram(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

RougeScore from_counts(double overlap, double cand_total, double ref_total) {
    RougeScore s;
    s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
    s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
    s.f1 = s.precision + s.recall > 0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

} // namespace

RougeScore rouge_n(std::span<const int> cand, std::span<const int> ref, int n) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    std::map<Gram, int> c = gram_counts(cand, n);
    std::map<Gram, int> r = gram_counts(ref, n);
    double overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [g, k] : c) {
        cand_total += k;
        auto it = r.find(g);
        if (it != r.end()) overlap += std::min(k, it->second);
    }
    for (const auto& [g, k] : r) ref_total += k;
    return from_counts(overlap, cand_total, ref_total);
}

RougeScore rouge_l(std::span<const int> cand, std::span<const int> ref) {
    const std::size_t n = cand.size(), m = ref.size();
    std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            dp[i][j] = cand[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1
                                                 : std::max(dp[i - 1][j], dp[i][j - 1]);
    return from_counts(dp[n][m], static_cast<double>(n), static_cast<double>(m));
}

double duplication_rate(std::span<const int> tokens, int n) {
    if (n < 1) throw std::invalid_argument("duplication_rate: n must be >= 1");
    if (static_cast<int>(tokens.size()) < n) return 0.0;
    std::set<Gram> unique;
    double total = 0;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        unique.insert(Gram(tokens.begin() + i, tokens.begin() + i + n));
        total += 1;
    }
    return 1.0 - static_cast<double>(unique.size()) / total;
}

AttentionStats attention_stats(const losses::DecodeTrace& trace, const std::vector<Mat>& gates) {
    if (trace.refined.empty()) throw std::invalid_argument("attention_stats: empty trace");
    if (!gates.empty() && gates.size() != trace.refined.size())
        throw std::invalid_argument("attention_stats: gate count mismatch");
    AttentionStats s;
    s.accumulated = Mat::Zero(1, trace.source_len());
    for (std::size_t t = 0; t < trace.refined.size(); ++t) {
        s.step_variance.push_back(losses::variance_around_median(trace.refined[t]));
        if (!gates.empty()) s.step_gate_mean.push_back(gates[t].mean());
        s.accumulated += trace.refined[t];
    }
    s.g = losses::global_g(trace.refined);
    return s;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    f << "model,split,rouge1,rouge2,rougeL,dup1,dup2,dup3,dup4,mean_local_variance,"
         "mean_global_g\n";
    char buf[256];
    for (const MetricsRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.rouge1,
                      r.rouge2, r.rougeL, r.dup1, r.dup2, r.dup3, r.dup4, r.mean_local_variance,
                      r.mean_global_g);
        f << r.model << ',' << r.split << ',' << buf << '\n';
    }
}

} // namespace attnvar::metrics
