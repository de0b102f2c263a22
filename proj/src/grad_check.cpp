// SPDX-License-Identifier: Apache-2.0
#include "attnvar/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace attnvar::ad {

namespace {
constexpr double kDegenerate = 1e-7; // both sides below this: compare absolutely
}

double grad_check(const std::function<double(bool)>& eval, std::span<Parameter* const> params,
                  double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

    for (Parameter* p : params) p->zero_grad();
    eval(true);

    std::vector<Mat> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        for (Eigen::Index k = 0; k < p.value.size(); ++k) {
            const double orig = p.value.data()[k];
            p.value.data()[k] = orig + step;
            const double f_plus = eval(false);
            p.value.data()[k] = orig - step;
            const double f_minus = eval(false);
            p.value.data()[k] = orig;

            const double central = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[i].data()[k];
            const double diff = std::abs(a - central);
            const double scale = std::max(std::abs(a), std::abs(central));
            const double err = scale < kDegenerate ? diff : diff / std::max(scale, 1e-12);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace attnvar::ad
