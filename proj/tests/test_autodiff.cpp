// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attnvar/grad_check.hpp"
#include "attnvar/graph.hpp"
#include "attnvar/ops.hpp"
#include "attnvar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

using namespace attnvar;
using namespace attnvar::ad;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -2.0, double hi = 2.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

// Rejection-samples until all pairwise gaps among `vals` exceed `gap` so that
// finite differences never cross an order-statistic boundary.
bool well_separated(const std::vector<double>& vals, double gap) {
    std::vector<double> s = vals;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] - s[i - 1] < gap) return false;
    return true;
}

double check(std::span<Parameter* const> params, const std::function<Var(Graph&)>& build,
             double step = 1e-5) {
    auto eval = [&](bool with_grad) {
        Graph g;
        Var root = build(g);
        double v = root.scalar();
        if (with_grad) g.backward(root);
        return v;
    };
    return grad_check(eval, params, step);
}

// Weighted sum turns any op output into a scalar with non-uniform out-grads.
Var weighted(Graph& g, Var y, const Mat& w) { return sum_all(mul(y, g.constant(w))); }

constexpr double kTol = 1e-6;
constexpr int kSeeds = 20;

} // namespace

TEST_CASE("frozen forward examples") {
    Graph g;
    Mat logits(1, 3);
    logits << 1.0, 2.0, 3.0;
    Var sm = softmax_rows(g.constant(logits));
    CHECK(sm.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sm.value()(0, 2) > sm.value()(0, 1));
    CHECK(sm.value()(0, 1) > sm.value()(0, 0));

    Mat two(1, 2);
    two << 0.0, 0.0;
    Var sm2 = softmax_rows(g.constant(two));
    CHECK(sm2.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sm2.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

    Var sg = sigmoid(g.constant_scalar(0.0));
    CHECK(sg.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

    Var lg = attnvar::ad::log(g.constant_scalar(1.0));
    CHECK(lg.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("d/dx sum(x*x) = 2x") {
    Mat x0(1, 2);
    x0 << 1.0, 2.0;
    Parameter x("x", x0);
    Graph g;
    Var x_ = g.leaf(x);
    Var f = sum_all(mul(x_, x_));
    CHECK(f.scalar() == doctest::Approx(5.0));
    x.zero_grad();
    g.backward(f);
    CHECK(x.grad(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(x.grad(0, 1) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("grad of sum(softmax(x)) vanishes") {
    Rng rng(7);
    Mat x0 = random_mat(rng, 3, 5, -4.0, 4.0);
    Parameter x("x", x0);
    Graph g;
    Var f = sum_all(softmax_rows(g.leaf(x)));
    CHECK(f.scalar() == doctest::Approx(3.0).epsilon(1e-12));
    x.zero_grad();
    g.backward(f);
    CHECK(x.grad.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("fan-out accumulates both contributions") {
    // f = sum(y) + sum(y*y) with y = tanh(x): df/dx = (1 + 2y) * (1 - y^2)
    Mat x0(2, 2);
    x0 << 0.3, -0.7, 1.1, 0.0;
    Parameter x("x", x0);
    Graph g;
    Var y = tanh(g.leaf(x));
    Var f = add(sum_all(y), sum_all(mul(y, y)));
    x.zero_grad();
    g.backward(f);
    Mat yv = x0.array().tanh().matrix();
    Mat expect = ((1.0 + 2.0 * yv.array()) * (1.0 - yv.array().square())).matrix();
    CHECK((x.grad - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("same Parameter fetched twice shares one leaf") {
    Mat x0(1, 3);
    x0 << 1.0, -2.0, 0.5;
    Parameter x("x", x0);
    Graph g;
    Var a = g.leaf(x);
    Var b = g.leaf(x);
    Var f = sum_all(mul(a, b)); // = sum(x^2)
    x.zero_grad();
    g.backward(f);
    CHECK((x.grad - Mat(2.0 * x0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("backward is single-use") {
    Parameter x("x", Mat::Ones(1, 1));
    Graph g;
    Var f = sum_all(square(g.leaf(x)));
    x.zero_grad();
    g.backward(f);
    CHECK_THROWS_AS(g.backward(f), std::logic_error);
}

TEST_CASE("gradients accumulate across graphs until zeroed") {
    Parameter x("x", Mat::Constant(1, 1, 3.0));
    x.zero_grad();
    for (int i = 0; i < 3; ++i) {
        Graph g;
        Var f = square(g.leaf(x));
        g.backward(f);
    }
    CHECK(x.grad(0, 0) == doctest::Approx(18.0)); // 3 * 2x
    x.zero_grad();
    CHECK(x.grad(0, 0) == 0.0);
}

TEST_CASE("shape errors and guards") {
    Graph g;
    Var a = g.constant(Mat::Ones(2, 3));
    Var b = g.constant(Mat::Ones(3, 4));
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(b, a), ShapeError);
    CHECK_THROWS_AS(pick(a, 5, 0), std::out_of_range);
    CHECK_THROWS_AS(g.backward(a), std::invalid_argument); // root must be scalar
}

TEST_CASE("softmax rows: simplex and monotone shift invariance") {
    Rng rng(11);
    for (int s = 0; s < kSeeds; ++s) {
        Mat x = random_mat(rng, 4, 6, -5.0, 5.0);
        Graph g;
        Mat y = softmax_rows(g.constant(x)).value();
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            CHECK(y.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
            for (Eigen::Index c = 0; c < y.cols(); ++c) {
                CHECK(y(r, c) > 0.0);
                CHECK(y(r, c) < 1.0);
            }
        }
        // shifting a row's logits by a constant leaves the row unchanged
        Mat shifted = x;
        shifted.row(1).array() += 37.5;
        Graph g2;
        Mat y2 = softmax_rows(g2.constant(shifted)).value();
        CHECK((y2.row(1) - y.row(1)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("masked softmax: zeros stay zero, valid entries renormalize") {
    Rng rng(13);
    for (int s = 0; s < kSeeds; ++s) {
        Mat x = random_mat(rng, 3, 5, -3.0, 3.0);
        Mat mask = Mat::Ones(3, 5);
        mask(0, 2) = 0.0;
        mask(1, 0) = 0.0;
        mask(1, 4) = 0.0;
        Graph g;
        Mat y = masked_softmax_rows(g.constant(x), mask).value();
        for (Eigen::Index r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (Eigen::Index c = 0; c < 5; ++c) {
                if (mask(r, c) == 0.0)
                    CHECK(y(r, c) == 0.0);
                else
                    sum += y(r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
        // row 1 must equal softmax over its valid columns alone
        Mat compact(1, 3);
        compact << x(1, 1), x(1, 2), x(1, 3);
        Graph g2;
        Mat ref = softmax_rows(g2.constant(compact)).value();
        CHECK(y(1, 1) == doctest::Approx(ref(0, 0)).epsilon(1e-12));
        CHECK(y(1, 2) == doctest::Approx(ref(0, 1)).epsilon(1e-12));
        CHECK(y(1, 3) == doctest::Approx(ref(0, 2)).epsilon(1e-12));
    }
    Graph g;
    Mat all_masked = Mat::Zero(1, 3);
    CHECK_THROWS_AS(masked_softmax_rows(g.constant(Mat::Ones(1, 3)), all_masked),
                    std::invalid_argument);
}

TEST_CASE("median: odd takes middle, even averages the two middles") {
    Graph g;
    Mat odd(1, 5);
    odd << 5.0, 1.0, 4.0, 2.0, 3.0;
    CHECK(median_all(g.constant(odd)).scalar() == doctest::Approx(3.0));
    Mat even(1, 4);
    even << 4.0, 1.0, 3.0, 2.0;
    CHECK(median_all(g.constant(even)).scalar() == doctest::Approx(2.5));

    // even case: gradient splits half/half onto the two middle elements
    Parameter x("x", even);
    Graph g2;
    x.zero_grad();
    g2.backward(median_all(g2.leaf(x)));
    Mat expect(1, 4);
    expect << 0.0, 0.0, 0.5, 0.5; // values 3.0 and 2.0
    CHECK((x.grad - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("colwise_max ties route gradient to first occurrence") {
    Mat x0(3, 2);
    x0 << 1.0, 7.0, 5.0, 7.0, 5.0, 2.0;
    Parameter x("x", x0);
    Graph g;
    x.zero_grad();
    g.backward(sum_all(colwise_max(g.leaf(x))));
    Mat expect(3, 2);
    expect << 0.0, 1.0, 1.0, 0.0, 0.0, 0.0;
    CHECK((x.grad - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scatter_cols accumulates duplicate targets") {
    Mat src(1, 4);
    src << 0.1, 0.2, 0.3, 0.4;
    std::vector<int> ids{2, 0, 2, 5};
    Graph g;
    Mat out = scatter_cols(g.constant(src), ids, 6).value();
    Mat expect = Mat::Zero(1, 6);
    expect(0, 2) = 0.1 + 0.3;
    expect(0, 0) = 0.2;
    expect(0, 5) = 0.4;
    CHECK((out - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("slices invert concatenation") {
    Rng rng(17);
    Mat a = random_mat(rng, 2, 3), b = random_mat(rng, 2, 4);
    Graph g;
    Var cc = concat_cols(std::vector<Var>{g.constant(a), g.constant(b)});
    CHECK((cols(cc, 0, 3).value() - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cols(cc, 3, 4).value() - b).cwiseAbs().maxCoeff() == 0.0);
    Mat c = random_mat(rng, 3, 3);
    Var cr = concat_rows(std::vector<Var>{g.constant(a), g.constant(c)});
    CHECK((rows(cr, 0, 2).value() - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rows(cr, 2, 3).value() - c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences agree for every primitive") {
    Rng rng(23);
    int done = 0;
    for (int s = 0; s < kSeeds; ++s) {
        Mat w34 = random_mat(rng, 3, 4), w33 = random_mat(rng, 3, 3), w43 = random_mat(rng, 4, 3);
        Mat w14 = random_mat(rng, 1, 4), w11 = random_mat(rng, 1, 1), w16 = random_mat(rng, 1, 6);
        Mat w64 = random_mat(rng, 6, 4), w31 = random_mat(rng, 3, 1);

        Parameter a("a", random_mat(rng, 3, 4));
        Parameter b("b", random_mat(rng, 3, 4));
        Parameter row("row", random_mat(rng, 1, 4));
        Parameter col("col", random_mat(rng, 3, 1));
        Parameter sc("sc", random_mat(rng, 1, 1));
        Parameter m43("m43", random_mat(rng, 4, 3));
        Parameter pos("pos", random_mat(rng, 3, 4, 0.5, 3.0));

        auto check1 = [&](Parameter& p, const Mat& w, auto&& builder) {
            Parameter* ps[] = {&p};
            CHECK(check(ps, [&](Graph& g) { return weighted(g, builder(g), w); }) < kTol);
        };
        auto check2 = [&](Parameter& p, Parameter& q, const Mat& w, auto&& builder) {
            Parameter* ps[] = {&p, &q};
            CHECK(check(ps, [&](Graph& g) { return weighted(g, builder(g), w); }) < kTol);
        };

        check2(a, b, w34, [&](Graph& g) { return add(g.leaf(a), g.leaf(b)); });
        check2(a, row, w34, [&](Graph& g) { return add(g.leaf(a), g.leaf(row)); });
        check2(a, col, w34, [&](Graph& g) { return sub(g.leaf(a), g.leaf(col)); });
        check2(a, sc, w34, [&](Graph& g) { return add(g.leaf(a), g.leaf(sc)); });
        check2(a, b, w34, [&](Graph& g) { return sub(g.leaf(a), g.leaf(b)); });
        check2(a, b, w34, [&](Graph& g) { return mul(g.leaf(a), g.leaf(b)); });
        check2(a, row, w34, [&](Graph& g) { return mul(g.leaf(a), g.leaf(row)); });
        check2(a, col, w34, [&](Graph& g) { return mul(g.leaf(a), g.leaf(col)); });
        check2(a, m43, w33, [&](Graph& g) { return matmul(g.leaf(a), g.leaf(m43)); });
        check1(a, w43, [&](Graph& g) { return transpose(g.leaf(a)); });
        check1(a, w34, [&](Graph& g) { return tanh(g.leaf(a)); });
        check1(a, w34, [&](Graph& g) { return sigmoid(g.leaf(a)); });
        check1(pos, w34, [&](Graph& g) { return attnvar::ad::log(g.leaf(pos)); });
        check1(pos, w34, [&](Graph& g) { return reciprocal(g.leaf(pos)); });
        check1(a, w34, [&](Graph& g) { return square(g.leaf(a)); });
        check1(a, w34, [&](Graph& g) { return scale(g.leaf(a), -1.7); });
        check1(a, w34, [&](Graph& g) { return add_scalar(g.leaf(a), 0.9); });
        check1(a, w34, [&](Graph& g) { return softmax_rows(g.leaf(a)); });
        check1(a, w11, [&](Graph& g) { return sum_all(g.leaf(a)); });
        check1(a, w11, [&](Graph& g) { return mean_all(g.leaf(a)); });
        check1(a, w14, [&](Graph& g) { return colwise_sum(g.leaf(a)); });
        check1(a, w11, [&](Graph& g) { return pick(g.leaf(a), 1, 2); });
        check2(a, b, w64, [&](Graph& g) {
            return concat_rows(std::vector<Var>{g.leaf(a), g.leaf(b)});
        });
        check2(a, b, random_mat(rng, 3, 8), [&](Graph& g) {
            return concat_cols(std::vector<Var>{g.leaf(a), g.leaf(b)});
        });
        check1(a, random_mat(rng, 2, 4), [&](Graph& g) { return rows(g.leaf(a), 1, 2); });
        check1(a, random_mat(rng, 3, 2), [&](Graph& g) { return cols(g.leaf(a), 1, 2); });

        {
            Mat mask = Mat::Ones(3, 4);
            mask(0, 1) = 0.0;
            mask(2, 3) = 0.0;
            check1(a, w34, [&](Graph& g) { return masked_softmax_rows(g.leaf(a), mask); });
        }
        {
            std::vector<int> ids{3, 1, 4, 1};
            check1(row, w16, [&](Graph& g) { return scatter_cols(g.leaf(row), ids, 6); });
        }

        // kinked ops: resample until every pairwise gap clears the FD step
        {
            Mat v;
            do {
                v = random_mat(rng, 1, 5);
            } while (!well_separated({v.data(), v.data() + v.size()}, 1e-3));
            Parameter p("p", v);
            Parameter* ps[] = {&p};
            CHECK(check(ps, [&](Graph& g) { return median_all(g.leaf(p)); }) < kTol);

            Mat v6;
            do {
                v6 = random_mat(rng, 1, 6);
            } while (!well_separated({v6.data(), v6.data() + v6.size()}, 1e-3));
            Parameter q("q", v6);
            Parameter* qs[] = {&q};
            CHECK(check(qs, [&](Graph& g) { return median_all(g.leaf(q)); }) < kTol);
        }
        {
            Mat v;
            bool ok;
            do {
                v = random_mat(rng, 3, 4);
                ok = true;
                for (Eigen::Index cidx = 0; cidx < 4 && ok; ++cidx) {
                    std::vector<double> colv;
                    for (Eigen::Index r = 0; r < 3; ++r) colv.push_back(v(r, cidx));
                    ok = well_separated(colv, 1e-3);
                }
            } while (!ok);
            Parameter p("p", v);
            Parameter* ps[] = {&p};
            CHECK(check(ps, [&](Graph& g) { return weighted(g, colwise_max(g.leaf(p)), w14); }) <
                  kTol);
        }
        {
            Mat v;
            do {
                v = random_mat(rng, 3, 4);
            } while ((v.array() - 0.3).abs().minCoeff() < 1e-3);
            Parameter p("p", v);
            Parameter* ps[] = {&p};
            CHECK(check(ps, [&](Graph& g) { return weighted(g, clamp_min(g.leaf(p), 0.3), w34); }) <
                  kTol);
        }
        ++done;
    }
    CHECK(done == kSeeds);
}

TEST_CASE("chained composite expression matches finite differences") {
    // touches matmul, tanh, sigmoid, softmax, broadcasting and slicing at once
    Rng rng(29);
    for (int s = 0; s < 5; ++s) {
        Parameter w1("w1", random_mat(rng, 4, 6, -0.7, 0.7));
        Parameter b1("b1", random_mat(rng, 1, 6, -0.3, 0.3));
        Parameter w2("w2", random_mat(rng, 6, 3, -0.7, 0.7));
        Mat x = random_mat(rng, 2, 4);
        Parameter* ps[] = {&w1, &b1, &w2};
        double err = check(ps, [&](Graph& g) {
            Var h = tanh(add(matmul(g.constant(x), g.leaf(w1)), g.leaf(b1)));
            Var sm = softmax_rows(matmul(h, g.leaf(w2)));
            Var picked = add(pick(sm, 0, 1), pick(sm, 1, 2));
            return add(attnvar::ad::log(clamp_min(picked, 1e-12)),
                       mean_all(sigmoid(cols(h, 1, 3))));
        });
        CHECK(err < kTol);
    }
}
