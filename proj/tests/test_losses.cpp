// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attnvar/grad_check.hpp"
#include "attnvar/losses.hpp"
#include "attnvar/ops.hpp"
#include "attnvar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace attnvar;
using namespace attnvar::losses;
using ad::Graph;
using ad::Parameter;
using ad::Var;

namespace {

Mat row4(double a, double b, double c, double d) {
    Mat m(1, 4);
    m << a, b, c, d;
    return m;
}

constexpr double kEps = 1e-6;

double min_pairwise_gap(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
    return gap;
}

// Random trace whose order statistics (row medians, column maxima, g median)
// all sit at least `gap` away from their nearest rival, so central differences
// never cross a kink.
Mat safe_trace(Rng& rng, Eigen::Index t, Eigen::Index d, double gap) {
    while (true) {
        Mat m(t, d);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.0, 1.0);
        bool ok = true;
        for (Eigen::Index r = 0; r < t && ok; ++r)
            ok = min_pairwise_gap({m.row(r).data(), m.row(r).data() + d}) >= gap;
        for (Eigen::Index c = 0; c < d && ok; ++c) {
            std::vector<double> col;
            for (Eigen::Index r = 0; r < t; ++r) col.push_back(m(r, c));
            ok = min_pairwise_gap(col) >= gap;
        }
        if (ok && t > 1) { // g is identically zero at T=1
            std::vector<Mat> rows;
            for (Eigen::Index r = 0; r < t; ++r) rows.push_back(m.row(r));
            Mat g = global_g(rows);
            ok = min_pairwise_gap({g.data(), g.data() + g.size()}) >= gap;
        }
        if (ok) return m;
    }
}

std::vector<Var> slice_rows(Graph& g, Var m) {
    std::vector<Var> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(ad::rows(m, r, 1));
    return out;
}

} // namespace

TEST_CASE("median convention") {
    CHECK(median({1, 2, 3}) == 2.0);
    CHECK(median({1, 2, 3, 4}) == 2.5);
    CHECK(median({5}) == 5.0);
    CHECK(median({3, 1, 2}) == 2.0); // order-free
    CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("local variance loss closed forms") {
    DecodeTrace one_hot{{row4(1, 0, 0, 0)}, {}};
    CHECK(local_variance_value(one_hot, kEps) ==
          doctest::Approx(1.0 / (0.25 + kEps)).epsilon(1e-9));

    DecodeTrace uniform{{row4(0.25, 0.25, 0.25, 0.25)}, {}};
    CHECK(local_variance_value(uniform, kEps) == doctest::Approx(1e6).epsilon(1e-9));

    DecodeTrace half{{row4(0.5, 0.5, 0, 0)}, {}};
    CHECK(local_variance_value(half, kEps) ==
          doctest::Approx(1.0 / (0.0625 + kEps)).epsilon(1e-9));

    // sharper-is-smaller ordering across the three
    CHECK(local_variance_value(one_hot, kEps) < local_variance_value(half, kEps));
    CHECK(local_variance_value(half, kEps) < local_variance_value(uniform, kEps));
}

TEST_CASE("local variance loss is permutation-invariant per step") {
    Rng rng(41);
    for (int s = 0; s < 10; ++s) {
        Mat a(1, 6);
        for (int i = 0; i < 6; ++i) a(0, i) = rng.uniform(0.0, 1.0);
        Mat b = a;
        std::vector<int> perm{0, 1, 2, 3, 4, 5};
        rng.shuffle(perm);
        for (int i = 0; i < 6; ++i) b(0, i) = a(0, perm[i]);
        DecodeTrace ta{{a}, {}}, tb{{b}, {}};
        CHECK(local_variance_value(ta, kEps) ==
              doctest::Approx(local_variance_value(tb, kEps)).epsilon(1e-12));
    }
}

TEST_CASE("global variance loss closed forms") {
    DecodeTrace single{{row4(0.3, 0.2, 0.4, 0.1)}, {}};
    CHECK(global_variance_value(single) == 0.0); // sum equals max at T=1

    DecodeTrace repeat{{row4(1, 0, 0, 0), row4(1, 0, 0, 0)}, {}};
    CHECK(global_variance_value(repeat) == 0.25);

    DecodeTrace distinct{{row4(1, 0, 0, 0), row4(0, 0, 1, 0)}, {}};
    CHECK(global_variance_value(distinct) == 0.0);

    Mat g = global_g({row4(1, 0, 0, 0), row4(1, 0, 0, 0)});
    CHECK((g - row4(1, 0, 0, 0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("global loss vanishes whenever per-position peaks are unique") {
    // each position attended in at most one step -> sum == max everywhere
    Rng rng(43);
    for (int s = 0; s < 10; ++s) {
        std::vector<Mat> rows;
        for (int t = 0; t < 3; ++t) {
            Mat r = Mat::Zero(1, 6);
            r(0, 2 * t) = rng.uniform(0.1, 1.0);
            rows.push_back(r);
        }
        DecodeTrace trace{rows, {}};
        CHECK(global_variance_value(trace) == 0.0);
    }
}

TEST_CASE("mle loss closed forms") {
    DecodeTrace sure{{}, {std::log(1.0), std::log(1.0)}};
    CHECK(mle_value(sure) == 0.0);

    DecodeTrace uniform8{{}, std::vector<double>(3, std::log(1.0 / 8.0))};
    CHECK(mle_value(uniform8) == doctest::Approx(std::log(8.0)).epsilon(1e-12));

    DecodeTrace two{{}, {std::log(0.5), std::log(0.25)}};
    CHECK(mle_value(two) ==
          doctest::Approx(0.5 * (std::log(2.0) + std::log(4.0))).epsilon(1e-12));

    // graph builder agrees with the numeric path
    Graph g;
    std::vector<Var> probs{g.constant_scalar(0.5), g.constant_scalar(0.25)};
    CHECK(mle_loss(probs).scalar() == doctest::Approx(mle_value(two)).epsilon(1e-14));
}

TEST_CASE("mixture recombines exactly and zero weights reduce to MLE") {
    Rng rng(47);
    Mat trace = safe_trace(rng, 3, 5, 1e-3);
    std::vector<Mat> rows;
    for (Eigen::Index r = 0; r < 3; ++r) rows.push_back(trace.row(r));
    DecodeTrace t{rows, {std::log(0.5), std::log(0.3), std::log(0.9)}};

    LossBreakdown b = mixed_value(t, 0.3, 0.1, kEps);
    CHECK(b.mixed == b.mle + (0.3 * b.local + 0.1 * b.global)); // exact, same order

    LossBreakdown b0 = mixed_value(t, 0.0, 0.0, kEps);
    CHECK(b0.mixed == b0.mle);

    // graph composition: mixed node equals the recombination of its own parts
    Graph g;
    std::vector<Var> probs{g.constant_scalar(0.5), g.constant_scalar(0.3),
                           g.constant_scalar(0.9)};
    std::vector<Var> rvars;
    for (const Mat& r : rows) rvars.push_back(g.constant(r));
    LossNodes nodes = mixed_loss(probs, rvars, 0.3, 0.1, kEps);
    CHECK(nodes.mixed.scalar() ==
          nodes.mle.scalar() + (0.3 * nodes.local.scalar() + 0.1 * nodes.global.scalar()));
    CHECK(nodes.local.scalar() == b.local);   // same graph arithmetic
    CHECK(nodes.global.scalar() == b.global);

    // spec'd arithmetic example: components (2.0, 4.0, 0.25), weights (0.3, 0.1)
    CHECK(2.0 + (0.3 * 4.0 + 0.1 * 0.25) == doctest::Approx(3.225).epsilon(1e-15));
}

TEST_CASE("losses match finite differences on random traces") {
    Rng rng(53);
    for (int s = 0; s < 8; ++s) {
        Parameter p("trace", safe_trace(rng, 5, 7, 1e-2));
        Parameter* ps[] = {&p};

        auto eval_local = [&](bool with_grad) {
            Graph g;
            Var root = local_variance_loss(slice_rows(g, g.leaf(p)), kEps);
            double v = root.scalar();
            if (with_grad) g.backward(root);
            return v;
        };
        CHECK(ad::grad_check(eval_local, ps, 1e-3) < 1e-4);

        auto eval_global = [&](bool with_grad) {
            Graph g;
            Var root = global_variance_loss(slice_rows(g, g.leaf(p)));
            double v = root.scalar();
            if (with_grad) g.backward(root);
            return v;
        };
        CHECK(ad::grad_check(eval_global, ps, 1e-3) < 1e-4);
    }

    // MLE over raw probability parameters
    for (int s = 0; s < 8; ++s) {
        Mat probs(1, 5);
        for (int i = 0; i < 5; ++i) probs(0, i) = rng.uniform(0.05, 0.95);
        Parameter p("probs", probs);
        Parameter* ps[] = {&p};
        auto eval = [&](bool with_grad) {
            Graph g;
            Var leaf = g.leaf(p);
            std::vector<Var> picked;
            for (int i = 0; i < 5; ++i) picked.push_back(ad::pick(leaf, 0, i));
            Var root = mle_loss(picked);
            double v = root.scalar();
            if (with_grad) g.backward(root);
            return v;
        };
        CHECK(ad::grad_check(eval, ps, 1e-5) < 1e-6);
    }

    // four-position single-step local loss, as pinned in the autodiff contract
    for (int s = 0; s < 8; ++s) {
        Parameter p("a", safe_trace(rng, 1, 4, 1e-2));
        Parameter* ps[] = {&p};
        auto eval = [&](bool with_grad) {
            Graph g;
            Var root = local_variance_loss(slice_rows(g, g.leaf(p)), kEps);
            double v = root.scalar();
            if (with_grad) g.backward(root);
            return v;
        };
        CHECK(ad::grad_check(eval, ps, 1e-4) < 1e-4);
    }

    // T=3 global trace at step 1e-3, as pinned in the autodiff contract
    for (int s = 0; s < 8; ++s) {
        Parameter p("tr", safe_trace(rng, 3, 6, 1e-2));
        Parameter* ps[] = {&p};
        auto eval = [&](bool with_grad) {
            Graph g;
            Var root = global_variance_loss(slice_rows(g, g.leaf(p)));
            double v = root.scalar();
            if (with_grad) g.backward(root);
            return v;
        };
        CHECK(ad::grad_check(eval, ps, 1e-3) < 1e-4);
    }
}
