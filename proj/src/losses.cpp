// SPDX-License-Identifier: Apache-2.0
#include "attnvar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attnvar::losses {

using ad::Graph;
using ad::Var;

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty sequence");
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double variance_around_median(const Mat& row) {
    std::vector<double> v(row.data(), row.data() + row.size());
    const double med = median(std::move(v));
    return (row.array() - med).square().sum() / static_cast<double>(row.size());
}

Mat global_g(const std::vector<Mat>& refined) {
    if (refined.empty()) throw std::invalid_argument("global_g: empty trace");
    Mat sum = Mat::Zero(1, refined.front().cols());
    Mat mx = refined.front();
    for (const Mat& r : refined) {
        if (r.rows() != 1 || r.cols() != sum.cols())
            throw std::invalid_argument("global_g: inconsistent row shapes");
        sum += r;
        mx = mx.cwiseMax(r);
    }
    return sum - mx;
}

namespace {
void require_rows(std::span<const Var> refined, const char* who) {
    if (refined.empty()) throw std::invalid_argument(std::string(who) + ": empty trace");
    for (const Var& r : refined)
        if (r.rows() != 1 || r.cols() != refined.front().cols())
            throw std::invalid_argument(std::string(who) + ": inconsistent row shapes");
}
} // namespace

Var local_variance_loss(std::span<const Var> refined, double eps) {
    require_rows(refined, "local_variance_loss");
    if (!(eps > 0.0)) throw std::invalid_argument("local_variance_loss: eps must be positive");
    std::vector<Var> terms;
    terms.reserve(refined.size());
    for (const Var& a : refined) {
        Var centered = ad::sub(a, ad::median_all(a));
        Var var = ad::mean_all(ad::square(centered));
        terms.push_back(ad::reciprocal(ad::add_scalar(var, eps)));
    }
    return ad::mean_all(ad::concat_cols(terms));
}

Var global_variance_loss(std::span<const Var> refined) {
    require_rows(refined, "global_variance_loss");
    Var stacked = ad::concat_rows(refined);
    Var g = ad::sub(ad::colwise_sum(stacked), ad::colwise_max(stacked));
    return ad::mean_all(ad::square(ad::sub(g, ad::median_all(g))));
}

Var mle_loss(std::span<const Var> gold_probs) {
    if (gold_probs.empty()) throw std::invalid_argument("mle_loss: empty trace");
    std::vector<Var> logs;
    logs.reserve(gold_probs.size());
    for (const Var& p : gold_probs) logs.push_back(ad::log(ad::clamp_min(p, 1e-12)));
    return ad::scale(ad::mean_all(ad::concat_cols(logs)), -1.0);
}

LossNodes mixed_loss(std::span<const Var> gold_probs, std::span<const Var> refined, double lambda1,
                     double lambda2, double eps) {
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw std::invalid_argument("mixed_loss: negative loss weight");
    Var mle = mle_loss(gold_probs);
    Var local = local_variance_loss(refined, eps);
    Var global = global_variance_loss(refined);
    Var mixed =
        ad::add(mle, ad::add(ad::scale(local, lambda1), ad::scale(global, lambda2)));
    return {mle, local, global, mixed};
}

namespace {
std::vector<Var> rows_as_constants(Graph& g, const std::vector<Mat>& refined) {
    std::vector<Var> out;
    out.reserve(refined.size());
    for (const Mat& r : refined) out.push_back(g.constant(r));
    return out;
}
} // namespace

double local_variance_value(const DecodeTrace& trace, double eps) {
    Graph g;
    return local_variance_loss(rows_as_constants(g, trace.refined), eps).scalar();
}

double global_variance_value(const DecodeTrace& trace) {
    Graph g;
    return global_variance_loss(rows_as_constants(g, trace.refined)).scalar();
}

double mle_value(const DecodeTrace& trace) {
    if (trace.gold_logp.empty()) throw std::invalid_argument("mle_value: empty trace");
    double sum = 0.0;
    for (double lp : trace.gold_logp) sum += lp;
    return -sum / static_cast<double>(trace.gold_logp.size());
}

LossBreakdown mixed_value(const DecodeTrace& trace, double lambda1, double lambda2, double eps) {
    LossBreakdown b;
    b.lambda1 = lambda1;
    b.lambda2 = lambda2;
    b.mle = mle_value(trace);
    b.local = local_variance_value(trace, eps);
    b.global = global_variance_value(trace);
    b.mixed = b.mle + (lambda1 * b.local + lambda2 * b.global);
    return b;
}

} // namespace attnvar::losses
