// SPDX-License-Identifier: Apache-2.0
#include "attnvar/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace attnvar::ad {

namespace {

void require_same_graph(const char* op, Var a, Var b) {
    if (a.graph() != b.graph()) {
        throw std::logic_error(std::string(op) + ": operands belong to different graphs");
    }
}

bool broadcast_dims(Eigen::Index a, Eigen::Index b, Eigen::Index& out) {
    if (a == b) { out = a; return true; }
    if (a == 1) { out = b; return true; }
    if (b == 1) { out = a; return true; }
    return false;
}

void broadcast_shape(const char* op, const Mat& a, const Mat& b, Eigen::Index& r, Eigen::Index& c) {
    if (!broadcast_dims(a.rows(), b.rows(), r) || !broadcast_dims(a.cols(), b.cols(), c)) {
        throw_shape_error(op, a, b);
    }
}

Mat expand(const Mat& m, Eigen::Index r, Eigen::Index c) {
    if (m.rows() == r && m.cols() == c) return m;
    return m.replicate(r / m.rows(), c / m.cols());
}

/// Sum-reduces a full-shape gradient back onto a broadcast operand's shape.
Mat reduce_to(const Mat& g, Eigen::Index r, Eigen::Index c) {
    if (g.rows() == r && g.cols() == c) return g;
    Mat out = g;
    if (r == 1 && out.rows() > 1) out = Mat(out.colwise().sum());
    if (c == 1 && out.cols() > 1) out = Mat(out.rowwise().sum());
    return out;
}

void accumulate_reduced(Node& parent, const Mat& g) {
    grad_buf(parent) += reduce_to(g, parent.value.rows(), parent.value.cols());
}

} // namespace

Var add(Var a, Var b) {
    require_same_graph("add", a, b);
    Eigen::Index r, c;
    broadcast_shape("add", a.value(), b.value(), r, c);
    Mat out = expand(a.value(), r, c) + expand(b.value(), r, c);
    return a.graph()->make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        accumulate_reduced(*n.parents[0], n.grad);
        accumulate_reduced(*n.parents[1], n.grad);
    });
}

Var sub(Var a, Var b) {
    require_same_graph("sub", a, b);
    Eigen::Index r, c;
    broadcast_shape("sub", a.value(), b.value(), r, c);
    Mat out = expand(a.value(), r, c) - expand(b.value(), r, c);
    return a.graph()->make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        accumulate_reduced(*n.parents[0], n.grad);
        accumulate_reduced(*n.parents[1], -n.grad);
    });
}

Var mul(Var a, Var b) {
    require_same_graph("mul", a, b);
    Eigen::Index r, c;
    broadcast_shape("mul", a.value(), b.value(), r, c);
    Mat out = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
    return a.graph()->make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        const Mat& av = n.parents[0]->value;
        const Mat& bv = n.parents[1]->value;
        accumulate_reduced(*n.parents[0], n.grad.cwiseProduct(expand(bv, n.grad.rows(), n.grad.cols())));
        accumulate_reduced(*n.parents[1], n.grad.cwiseProduct(expand(av, n.grad.rows(), n.grad.cols())));
    });
}

Var matmul(Var a, Var b) {
    require_same_graph("matmul", a, b);
    if (a.cols() != b.rows()) throw_shape_error("matmul", a.value(), b.value());
    Mat out = a.value() * b.value();
    return a.graph()->make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        grad_buf(*n.parents[0]) += n.grad * n.parents[1]->value.transpose();
        grad_buf(*n.parents[1]) += n.parents[0]->value.transpose() * n.grad;
    });
}

Var transpose(Var a) {
    Mat out = a.value().transpose();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]) += n.grad.transpose();
    });
}

Var tanh(Var a) {
    Mat out = a.value().array().tanh();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += n.grad.array() * (1.0 - n.value.array().square());
    });
}

Var sigmoid(Var a) {
    Mat out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += n.grad.array() * n.value.array() * (1.0 - n.value.array());
    });
}

Var log(Var a) {
    Mat out = a.value().array().log();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += n.grad.array() / n.parents[0]->value.array();
    });
}

Var reciprocal(Var a) {
    Mat out = a.value().cwiseInverse();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() -= n.grad.array() * n.value.array().square();
    });
}

Var square(Var a) {
    Mat out = a.value().array().square();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += 2.0 * n.grad.array() * n.parents[0]->value.array();
    });
}

Var clamp_min(Var a, double floor) {
    Mat out = a.value().cwiseMax(floor);
    return a.graph()->make(std::move(out), {a.node()}, [floor](Node& n) {
        grad_buf(*n.parents[0]).array() +=
            n.grad.array() * (n.parents[0]->value.array() > floor).cast<double>();
    });
}

Var scale(Var a, double s) {
    Mat out = a.value() * s;
    return a.graph()->make(std::move(out), {a.node()}, [s](Node& n) {
        grad_buf(*n.parents[0]) += n.grad * s;
    });
}

Var add_scalar(Var a, double s) {
    Mat out = a.value().array() + s;
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]) += n.grad;
    });
}

namespace {

void softmax_backward(Node& n) {
    Mat& ga = grad_buf(*n.parents[0]);
    for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
        const double dot = n.grad.row(r).cwiseProduct(n.value.row(r)).sum();
        ga.row(r).array() += n.value.row(r).array() * (n.grad.row(r).array() - dot);
    }
}

} // namespace

Var softmax_rows(Var a) {
    const Mat& x = a.value();
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        Eigen::ArrayXd e = (x.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return a.graph()->make(std::move(out), {a.node()}, softmax_backward);
}

Var masked_softmax_rows(Var a, const Mat& mask) {
    const Mat& x = a.value();
    if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
        throw_shape_error("masked_softmax_rows", x, mask);
    }
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double mv = mask(r, c);
            if (mv != 0.0 && mv != 1.0) {
                throw std::invalid_argument("masked_softmax_rows: mask entries must be 0 or 1");
            }
            if (mv == 1.0) m = std::max(m, x(r, c));
        }
        if (!std::isfinite(m)) {
            throw std::invalid_argument("masked_softmax_rows: row " + std::to_string(r) + " is fully masked");
        }
        double sum = 0.0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double e = mask(r, c) == 1.0 ? std::exp(x(r, c) - m) : 0.0;
            out(r, c) = e;
            sum += e;
        }
        out.row(r) /= sum;
    }
    // Masked entries have value exactly 0, so the standard softmax backward
    // already routes no gradient to them.
    return a.graph()->make(std::move(out), {a.node()}, softmax_backward);
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
    const Eigen::Index c = parts[0].cols();
    Eigen::Index total = 0;
    std::vector<Node*> parents;
    parents.reserve(parts.size());
    for (Var p : parts) {
        require_same_graph("concat_rows", parts[0], p);
        if (p.cols() != c) throw_shape_error("concat_rows", parts[0].value(), p.value());
        total += p.rows();
        parents.push_back(p.node());
    }
    Mat out(total, c);
    Eigen::Index r0 = 0;
    for (Var p : parts) {
        out.middleRows(r0, p.rows()) = p.value();
        r0 += p.rows();
    }
    return parts[0].graph()->make(std::move(out), std::move(parents), [](Node& n) {
        Eigen::Index r = 0;
        for (Node* p : n.parents) {
            grad_buf(*p) += n.grad.middleRows(r, p->value.rows());
            r += p->value.rows();
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
    const Eigen::Index r = parts[0].rows();
    Eigen::Index total = 0;
    std::vector<Node*> parents;
    parents.reserve(parts.size());
    for (Var p : parts) {
        require_same_graph("concat_cols", parts[0], p);
        if (p.rows() != r) throw_shape_error("concat_cols", parts[0].value(), p.value());
        total += p.cols();
        parents.push_back(p.node());
    }
    Mat out(r, total);
    Eigen::Index c0 = 0;
    for (Var p : parts) {
        out.middleCols(c0, p.cols()) = p.value();
        c0 += p.cols();
    }
    return parts[0].graph()->make(std::move(out), std::move(parents), [](Node& n) {
        Eigen::Index c = 0;
        for (Node* p : n.parents) {
            grad_buf(*p) += n.grad.middleCols(c, p->value.cols());
            c += p->value.cols();
        }
    });
}

Var rows(Var a, Eigen::Index r0, Eigen::Index n) {
    if (r0 < 0 || n < 1 || r0 + n > a.rows()) throw_shape_error("rows", a.value());
    Mat out = a.value().middleRows(r0, n);
    return a.graph()->make(std::move(out), {a.node()}, [r0](Node& nd) {
        grad_buf(*nd.parents[0]).middleRows(r0, nd.value.rows()) += nd.grad;
    });
}

Var cols(Var a, Eigen::Index c0, Eigen::Index n) {
    if (c0 < 0 || n < 1 || c0 + n > a.cols()) throw_shape_error("cols", a.value());
    Mat out = a.value().middleCols(c0, n);
    return a.graph()->make(std::move(out), {a.node()}, [c0](Node& nd) {
        grad_buf(*nd.parents[0]).middleCols(c0, nd.value.cols()) += nd.grad;
    });
}

Var sum_all(Var a) {
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += n.grad(0, 0);
    });
}

Var mean_all(Var a) {
    Mat out(1, 1);
    out(0, 0) = a.value().mean();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).array() += n.grad(0, 0) / static_cast<double>(n.parents[0]->value.size());
    });
}

Var colwise_sum(Var a) {
    Mat out = a.value().colwise().sum();
    return a.graph()->make(std::move(out), {a.node()}, [](Node& n) {
        grad_buf(*n.parents[0]).rowwise() += n.grad.row(0);
    });
}

Var colwise_max(Var a) {
    const Mat& x = a.value();
    Mat out(1, x.cols());
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < x.rows(); ++r) {
            if (x(r, c) > x(best, c)) best = r;
        }
        arg[static_cast<std::size_t>(c)] = best;
        out(0, c) = x(best, c);
    }
    return a.graph()->make(std::move(out), {a.node()}, [arg = std::move(arg)](Node& n) {
        Mat& g = grad_buf(*n.parents[0]);
        for (Eigen::Index c = 0; c < n.value.cols(); ++c) {
            g(arg[static_cast<std::size_t>(c)], c) += n.grad(0, c);
        }
    });
}

Var median_all(Var a) {
    const Mat& x = a.value();
    const Eigen::Index n = x.size();
    if (n < 1) throw std::invalid_argument("median_all: empty input");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    // Row-major flat view; stable value sort keeps ties at the lowest index.
    const double* flat = x.data();
    std::stable_sort(idx.begin(), idx.end(),
                     [flat](Eigen::Index i, Eigen::Index j) { return flat[i] < flat[j]; });
    Mat out(1, 1);
    if (n % 2 == 1) {
        const Eigen::Index sel = idx[static_cast<std::size_t>(n / 2)];
        out(0, 0) = flat[sel];
        return a.graph()->make(std::move(out), {a.node()}, [sel](Node& nd) {
            grad_buf(*nd.parents[0]).data()[sel] += nd.grad(0, 0);
        });
    }
    const Eigen::Index lo = idx[static_cast<std::size_t>(n / 2 - 1)];
    const Eigen::Index hi = idx[static_cast<std::size_t>(n / 2)];
    out(0, 0) = 0.5 * (flat[lo] + flat[hi]);
    return a.graph()->make(std::move(out), {a.node()}, [lo, hi](Node& nd) {
        double* g = grad_buf(*nd.parents[0]).data();
        g[lo] += 0.5 * nd.grad(0, 0);
        g[hi] += 0.5 * nd.grad(0, 0);
    });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
        throw std::out_of_range("pick: index (" + std::to_string(r) + "," + std::to_string(c) +
                                ") outside " + shape_str(a.value()));
    Mat out(1, 1);
    out(0, 0) = a.value()(r, c);
    return a.graph()->make(std::move(out), {a.node()}, [r, c](Node& n) {
        grad_buf(*n.parents[0])(r, c) += n.grad(0, 0);
    });
}

Var scatter_cols(Var a, std::span<const int> ids, Eigen::Index out_cols) {
    const Mat& x = a.value();
    if (x.rows() != 1) throw_shape_error("scatter_cols", x);
    if (static_cast<Eigen::Index>(ids.size()) != x.cols()) {
        throw std::invalid_argument("scatter_cols: got " + std::to_string(ids.size()) + " ids for " +
                                    shape_str(x) + " input");
    }
    Mat out = Mat::Zero(1, out_cols);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= out_cols) {
            throw std::invalid_argument("scatter_cols: id " + std::to_string(id) + " out of range [0, " +
                                        std::to_string(out_cols) + ")");
        }
        out(0, id) += x(0, i);
    }
    std::vector<int> ids_copy(ids.begin(), ids.end());
    return a.graph()->make(std::move(out), {a.node()}, [ids_copy = std::move(ids_copy)](Node& n) {
        Mat& g = grad_buf(*n.parents[0]);
        for (std::size_t i = 0; i < ids_copy.size(); ++i) {
            g(0, static_cast<Eigen::Index>(i)) += n.grad(0, ids_copy[i]);
        }
    });
}

} // namespace attnvar::ad
