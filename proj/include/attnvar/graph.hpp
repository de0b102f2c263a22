// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/tensor.hpp"

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace attnvar::ad {

using attnvar::Mat;

/// A named learnable weight. Gradients accumulate additively across backward
/// passes; the caller zeroes them between optimizer steps.
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;

    Parameter(std::string param_name, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(param_name)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

    Parameter(std::string param_name, Mat initial)
        : name(std::move(param_name)), value(std::move(initial)),
          grad(Mat::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
    Eigen::Index size() const { return value.size(); }
};

class Graph;

/// One step of a recorded computation. `backprop` distributes `grad` to the
/// parents; it is empty for constants and leaves.
struct Node {
    Mat value;
    Mat grad; // allocated lazily; empty until the backward pass touches it
    std::vector<Node*> parents;
    std::function<void(Node&)> backprop;
    Parameter* param = nullptr;
    bool reached = false;
};

/// Returns the gradient buffer of a node, zero-initialized on first use.
inline Mat& grad_buf(Node& n) {
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

/// Lightweight handle to a node inside a Graph.
class Var {
public:
    Var() = default;
    Var(Graph* graph, Node* node) : graph_(graph), node_(node) {}

    const Mat& value() const { return node_->value; }
    const Mat& grad() const { return node_->grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }

    Graph* graph() const { return graph_; }
    Node* node() const { return node_; }
    bool valid() const { return node_ != nullptr; }

private:
    Graph* graph_ = nullptr;
    Node* node_ = nullptr;
};

/// Reverse-mode tape. Nodes are appended in forward order, which is a
/// topological order of the (acyclic by construction) graph, so the backward
/// pass is a single reverse sweep.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Mat v) { return make(std::move(v), {}, nullptr); }

    Var constant_scalar(double v) {
        Mat m(1, 1);
        m(0, 0) = v;
        return constant(std::move(m));
    }

    /// Inserts a leaf node bound to a parameter. Repeated calls with the same
    /// parameter return the same node.
    Var leaf(Parameter& p) {
        auto it = leaf_nodes_.find(&p);
        if (it != leaf_nodes_.end()) return Var(this, it->second);
        Var v = make(p.value, {}, nullptr);
        v.node()->param = &p;
        leaf_nodes_.emplace(&p, v.node());
        return v;
    }

    Var make(Mat value, std::vector<Node*> parents, std::function<void(Node&)> backprop) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backprop = std::move(backprop);
        return Var(this, &n);
    }

    /// Propagates d(root)/d(node) to every node reachable from `root` and
    /// adds each leaf's gradient into its bound parameter. `root` must be a
    /// 1x1 scalar.
    void backward(Var root) {
        if (root.rows() != 1 || root.cols() != 1) {
            throw std::invalid_argument("backward: root must be a scalar, got " + shape_str(root.value()));
        }
        if (backward_done_) throw std::logic_error("backward: graph already differentiated");
        backward_done_ = true;
        // Mark the ancestors of the root so unrelated subgraphs are skipped.
        std::vector<Node*> stack{root.node()};
        root.node()->reached = true;
        while (!stack.empty()) {
            Node* n = stack.back();
            stack.pop_back();
            for (Node* p : n->parents) {
                if (!p->reached) {
                    p->reached = true;
                    stack.push_back(p);
                }
            }
        }
        grad_buf(*root.node())(0, 0) += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node& n = *it;
            if (!n.reached) continue;
            if (n.backprop) n.backprop(n);
            if (n.param != nullptr) n.param->grad += grad_buf(n);
            n.reached = false;
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;
    std::unordered_map<Parameter*, Node*> leaf_nodes_;
    bool backward_done_ = false;
};

} // namespace attnvar::ad
