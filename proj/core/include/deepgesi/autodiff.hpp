// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "deepgesi/errors.hpp"
#include "deepgesi/mat.hpp"

namespace deepgesi::ad {

// Reverse-mode automatic differentiation over dense matrices.
//
// Graphs are built define-by-run: each operation eagerly computes its value
// and, when any input requires gradients, attaches a backward closure that
// propagates the output gradient to its parents. A Var is a cheap handle to
// a shared node; intermediate nodes are freed when the last handle to the
// graph root is dropped.
//
// The engine is templated on the scalar type: double for finite-difference
// verification, float for training and inference.
//
// Threading: a graph is confined to the thread that builds it. Distinct
// graphs on distinct threads are independent; leaf (parameter) values may be
// shared read-only across threads during inference.

template <typename T>
struct NodeData {
    Mat<T> value;
    Mat<T> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeData<T>>> parents;
    // Propagates this node's grad into parents' grads.
    std::function<void()> backward;
    const char* op = "leaf";

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
            grad = Mat<T>::Zero(value.rows(), value.cols());
        }
    }

    void zero_grad() {
        if (grad.size() > 0) { grad.setZero(); }
    }
};

template <typename T>
class Var {
  public:
    Var() = default;
    explicit Var(std::shared_ptr<NodeData<T>> node) : node_(std::move(node)) {}

    // Leaf constructors.
    static auto leaf(Mat<T> value, bool requires_grad = false) -> Var {
        auto node = std::make_shared<NodeData<T>>();
        node->value = std::move(value);
        node->requires_grad = requires_grad;
        return Var(std::move(node));
    }

    static auto scalar(T value, bool requires_grad = false) -> Var {
        Mat<T> m(1, 1);
        m(0, 0) = value;
        return leaf(std::move(m), requires_grad);
    }

    [[nodiscard]] auto defined() const -> bool { return node_ != nullptr; }
    [[nodiscard]] auto value() const -> const Mat<T>& { return node_->value; }
    [[nodiscard]] auto value() -> Mat<T>& { return node_->value; }
    [[nodiscard]] auto grad() const -> const Mat<T>& { return node_->grad; }
    [[nodiscard]] auto rows() const -> Eigen::Index { return node_->value.rows(); }
    [[nodiscard]] auto cols() const -> Eigen::Index { return node_->value.cols(); }
    [[nodiscard]] auto requires_grad() const -> bool { return node_->requires_grad; }
    [[nodiscard]] auto item() const -> T {
        if (node_->value.size() != 1) {
            throw NumericError(std::string("item() on non-scalar node of op ") + node_->op);
        }
        return node_->value(0, 0);
    }
    [[nodiscard]] auto node() const -> const std::shared_ptr<NodeData<T>>& { return node_; }

    void zero_grad() { node_->zero_grad(); }

    // Runs reverse-mode accumulation from this (scalar) node. Gradients
    // accumulate into every reachable node with requires_grad; repeated
    // calls without zero_grad keep accumulating. seed scales the root
    // gradient (used for loss averaging across a gradient-accumulation
    // group).
    void backward(T seed = T(1)) const {
        if (node_->value.size() != 1) {
            throw NumericError(std::string("backward() requires a scalar root; got ") +
                               std::to_string(node_->value.rows()) + "x" +
                               std::to_string(node_->value.cols()) + " from op " + node_->op);
        }
        // Iterative post-order topological sort (explicit stack; graphs can
        // be thousands of nodes deep).
        std::vector<NodeData<T>*> order;
        std::unordered_set<NodeData<T>*> visited;
        struct Frame {
            NodeData<T>* node;
            std::size_t next_parent;
        };
        std::vector<Frame> stack;
        stack.push_back({node_.get(), 0});
        visited.insert(node_.get());
        while (!stack.empty()) {
            Frame& top = stack.back();
            if (top.next_parent < top.node->parents.size()) {
                NodeData<T>* parent = top.node->parents[top.next_parent].get();
                ++top.next_parent;
                if (visited.insert(parent).second) { stack.push_back({parent, 0}); }
            } else {
                order.push_back(top.node);
                stack.pop_back();
            }
        }
        // order is post-order: parents before children; reverse for backprop.
        node_->ensure_grad();
        node_->grad(0, 0) += seed;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward) { (*it)->backward(); }
        }
    }

  private:
    std::shared_ptr<NodeData<T>> node_;
};

namespace detail {

template <typename T>
auto make_node(Mat<T> value, const char* op, std::vector<std::shared_ptr<NodeData<T>>> parents)
    -> std::shared_ptr<NodeData<T>> {
    auto node = std::make_shared<NodeData<T>>();
    node->value = std::move(value);
    node->op = op;
    for (auto& p : parents) {
        if (p->requires_grad) { node->requires_grad = true; }
    }
    if (node->requires_grad) { node->parents = std::move(parents); }
    return node;
}

template <typename T>
[[noreturn]] void shape_error(const char* op, const Mat<T>& a, const Mat<T>& b) {
    throw NumericError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
auto add(const Var<T>& a, const Var<T>& b) -> Var<T> {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        detail::shape_error("add", a.value(), b.value());
    }
    auto node = detail::make_node<T>(a.value() + b.value(), "add", {a.node(), b.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        auto out = node.get();
        node->backward = [an, bn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad += out->grad;
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad += out->grad;
            }
        };
    }
    return Var<T>(node);
}

template <typename T>
auto sub(const Var<T>& a, const Var<T>& b) -> Var<T> {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        detail::shape_error("sub", a.value(), b.value());
    }
    auto node = detail::make_node<T>(a.value() - b.value(), "sub", {a.node(), b.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        auto out = node.get();
        node->backward = [an, bn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad += out->grad;
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad -= out->grad;
            }
        };
    }
    return Var<T>(node);
}

template <typename T>
auto mul(const Var<T>& a, const Var<T>& b) -> Var<T> {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        detail::shape_error("mul", a.value(), b.value());
    }
    auto node = detail::make_node<T>(a.value().cwiseProduct(b.value()), "mul",
                                     {a.node(), b.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        auto out = node.get();
        node->backward = [an, bn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad += out->grad.cwiseProduct(bn->value);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad += out->grad.cwiseProduct(an->value);
            }
        };
    }
    return Var<T>(node);
}

template <typename T>
auto add_scalar(const Var<T>& a, T c) -> Var<T> {
    auto node = detail::make_node<T>(a.value().array() + c, "add_scalar", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad += out->grad;
        };
    }
    return Var<T>(node);
}

template <typename T>
auto mul_scalar(const Var<T>& a, T c) -> Var<T> {
    auto node = detail::make_node<T>(a.value() * c, "mul_scalar", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, c] {
            an->ensure_grad();
            an->grad += out->grad * c;
        };
    }
    return Var<T>(node);
}

// Adds a [1 x C] row vector to every row of a [R x C] matrix (bias add).
template <typename T>
auto add_row_broadcast(const Var<T>& a, const Var<T>& row) -> Var<T> {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        detail::shape_error("add_row_broadcast", a.value(), row.value());
    }
    Mat<T> value = a.value();
    value.rowwise() += Eigen::RowVector<T, Eigen::Dynamic>(row.value().row(0));
    auto node = detail::make_node<T>(std::move(value), "add_row_broadcast",
                                     {a.node(), row.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto rn = row.node();
        auto out = node.get();
        node->backward = [an, rn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad += out->grad;
            }
            if (rn->requires_grad) {
                rn->ensure_grad();
                rn->grad.row(0) += out->grad.colwise().sum();
            }
        };
    }
    return Var<T>(node);
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
auto abs(const Var<T>& a) -> Var<T> {
    auto node = detail::make_node<T>(a.value().cwiseAbs(), "abs", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            // sign(0) = 0 (subgradient choice at the kink).
            an->grad.array() +=
                out->grad.array() * an->value.array().sign();
        };
    }
    return Var<T>(node);
}

template <typename T>
auto square(const Var<T>& a) -> Var<T> {
    auto node = detail::make_node<T>(a.value().cwiseProduct(a.value()), "square", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad.array() += T(2) * out->grad.array() * an->value.array();
        };
    }
    return Var<T>(node);
}

template <typename T>
auto sigmoid(const Var<T>& a) -> Var<T> {
    Mat<T> value = ((-a.value().array()).exp() + T(1)).inverse();
    auto node = detail::make_node<T>(std::move(value), "sigmoid", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad.array() += out->grad.array() * out->value.array() *
                                (T(1) - out->value.array());
        };
    }
    return Var<T>(node);
}

// log(x + eps); inputs must satisfy x + eps > 0.
template <typename T>
auto log_eps(const Var<T>& a, T eps) -> Var<T> {
    Mat<T> value = (a.value().array() + eps).log();
    auto node = detail::make_node<T>(std::move(value), "log_eps", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, eps] {
            an->ensure_grad();
            an->grad.array() += out->grad.array() / (an->value.array() + eps);
        };
    }
    return Var<T>(node);
}

template <typename T>
auto relu(const Var<T>& a) -> Var<T> {
    auto node = detail::make_node<T>(a.value().cwiseMax(T(0)), "relu", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad.array() += out->grad.array() *
                                (an->value.array() > T(0)).template cast<T>();
        };
    }
    return Var<T>(node);
}

template <typename T>
auto leaky_relu(const Var<T>& a, T slope) -> Var<T> {
    Mat<T> value = a.value().array().max(a.value().array() * slope);
    auto node = detail::make_node<T>(std::move(value), "leaky_relu", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, slope] {
            an->ensure_grad();
            const auto positive = (an->value.array() > T(0)).template cast<T>();
            an->grad.array() +=
                out->grad.array() * (positive + (T(1) - positive) * slope);
        };
    }
    return Var<T>(node);
}

// PReLU with one learnable slope shared across the tensor ([1 x 1] node).
template <typename T>
auto prelu(const Var<T>& a, const Var<T>& slope) -> Var<T> {
    if (slope.rows() != 1 || slope.cols() != 1) {
        detail::shape_error("prelu", a.value(), slope.value());
    }
    const T s = slope.value()(0, 0);
    Mat<T> value = a.value().array().max(a.value().array() * s);
    auto node = detail::make_node<T>(std::move(value), "prelu", {a.node(), slope.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto sn = slope.node();
        auto out = node.get();
        node->backward = [an, sn, out] {
            const T s_now = sn->value(0, 0);
            const auto positive = (an->value.array() > T(0)).template cast<T>();
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad.array() +=
                    out->grad.array() * (positive + (T(1) - positive) * s_now);
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                sn->grad(0, 0) +=
                    (out->grad.array() * (T(1) - positive) * an->value.array()).sum();
            }
        };
    }
    return Var<T>(node);
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

template <typename T>
auto matmul(const Var<T>& a, const Var<T>& b) -> Var<T> {
    if (a.cols() != b.rows()) { detail::shape_error("matmul", a.value(), b.value()); }
    auto node = detail::make_node<T>(a.value() * b.value(), "matmul", {a.node(), b.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        auto out = node.get();
        node->backward = [an, bn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad.noalias() += out->grad * bn->value.transpose();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad.noalias() += an->value.transpose() * out->grad;
            }
        };
    }
    return Var<T>(node);
}

template <typename T>
auto transpose(const Var<T>& a) -> Var<T> {
    auto node = detail::make_node<T>(a.value().transpose(), "transpose", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad += out->grad.transpose();
        };
    }
    return Var<T>(node);
}

// Row-major reinterpretation to a new shape with the same element count.
template <typename T>
auto reshape(const Var<T>& a, Eigen::Index rows, Eigen::Index cols) -> Var<T> {
    if (rows * cols != a.rows() * a.cols()) {
        throw NumericError("reshape: element count mismatch (" + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + " to " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ")");
    }
    Mat<T> value(rows, cols);
    std::copy(a.value().data(), a.value().data() + a.value().size(), value.data());
    auto node = detail::make_node<T>(std::move(value), "reshape", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            Eigen::Map<const Mat<T>> g(out->grad.data(), an->value.rows(), an->value.cols());
            an->grad += g;
        };
    }
    return Var<T>(node);
}

template <typename T>
auto slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index width) -> Var<T> {
    if (start < 0 || width <= 0 || start + width > a.cols()) {
        throw NumericError("slice_cols: range [" + std::to_string(start) + ", " +
                           std::to_string(start + width) + ") out of bounds for " +
                           std::to_string(a.cols()) + " columns");
    }
    auto node = detail::make_node<T>(a.value().middleCols(start, width), "slice_cols",
                                     {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, start, width] {
            an->ensure_grad();
            an->grad.middleCols(start, width) += out->grad;
        };
    }
    return Var<T>(node);
}

template <typename T>
auto slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index height) -> Var<T> {
    if (start < 0 || height <= 0 || start + height > a.rows()) {
        throw NumericError("slice_rows: range [" + std::to_string(start) + ", " +
                           std::to_string(start + height) + ") out of bounds for " +
                           std::to_string(a.rows()) + " rows");
    }
    auto node = detail::make_node<T>(a.value().middleRows(start, height), "slice_rows",
                                     {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, start, height] {
            an->ensure_grad();
            an->grad.middleRows(start, height) += out->grad;
        };
    }
    return Var<T>(node);
}

template <typename T>
auto concat_cols(const Var<T>& a, const Var<T>& b) -> Var<T> {
    if (a.rows() != b.rows()) { detail::shape_error("concat_cols", a.value(), b.value()); }
    Mat<T> value(a.rows(), a.cols() + b.cols());
    value.leftCols(a.cols()) = a.value();
    value.rightCols(b.cols()) = b.value();
    auto node = detail::make_node<T>(std::move(value), "concat_cols", {a.node(), b.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        auto out = node.get();
        node->backward = [an, bn, out] {
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad += out->grad.leftCols(an->value.cols());
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad += out->grad.rightCols(bn->value.cols());
            }
        };
    }
    return Var<T>(node);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
auto sum_all(const Var<T>& a) -> Var<T> {
    Mat<T> value(1, 1);
    value(0, 0) = a.value().sum();
    auto node = detail::make_node<T>(std::move(value), "sum_all", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad.array() += out->grad(0, 0);
        };
    }
    return Var<T>(node);
}

template <typename T>
auto mean_all(const Var<T>& a) -> Var<T> {
    Mat<T> value(1, 1);
    value(0, 0) = a.value().mean();
    auto node = detail::make_node<T>(std::move(value), "mean_all", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            an->grad.array() += out->grad(0, 0) / static_cast<T>(an->value.size());
        };
    }
    return Var<T>(node);
}

// ---------------------------------------------------------------------------
// Structured ops used by the network
// ---------------------------------------------------------------------------

// Row-wise softmax with max-subtraction for stability.
template <typename T>
auto softmax_rows(const Var<T>& a) -> Var<T> {
    Mat<T> value(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const T row_max = a.value().row(r).maxCoeff();
        Eigen::Array<T, 1, Eigen::Dynamic> e = (a.value().row(r).array() - row_max).exp();
        value.row(r) = e / e.sum();
    }
    auto node = detail::make_node<T>(std::move(value), "softmax_rows", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out] {
            an->ensure_grad();
            for (Eigen::Index r = 0; r < out->value.rows(); ++r) {
                const T dot = out->grad.row(r).dot(out->value.row(r));
                an->grad.row(r).array() +=
                    out->value.row(r).array() * (out->grad.row(r).array() - dot);
            }
        };
    }
    return Var<T>(node);
}

// Max over pieces within each group of the trailing (column) axis.
// Input columns are group-major: group g occupies columns [g*pieces,
// (g+1)*pieces). Ties route the gradient to the lowest piece index.
template <typename T>
auto maxout(const Var<T>& a, int pieces) -> Var<T> {
    if (pieces <= 0 || a.cols() % pieces != 0) {
        throw NumericError("maxout: trailing dimension " + std::to_string(a.cols()) +
                           " not divisible by pieces " + std::to_string(pieces));
    }
    const Eigen::Index groups = a.cols() / pieces;
    Mat<T> value(a.rows(), groups);
    auto winners = std::make_shared<std::vector<std::int32_t>>(
        static_cast<std::size_t>(a.rows() * groups));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index g = 0; g < groups; ++g) {
            Eigen::Index best = 0;
            T best_value = a.value()(r, g * pieces);
            for (Eigen::Index p = 1; p < pieces; ++p) {
                const T v = a.value()(r, g * pieces + p);
                if (v > best_value) {  // strict: ties keep the lowest index
                    best_value = v;
                    best = p;
                }
            }
            value(r, g) = best_value;
            (*winners)[static_cast<std::size_t>(r * groups + g)] =
                static_cast<std::int32_t>(best);
        }
    }
    auto node = detail::make_node<T>(std::move(value), "maxout", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, winners, groups, pieces] {
            an->ensure_grad();
            for (Eigen::Index r = 0; r < out->value.rows(); ++r) {
                for (Eigen::Index g = 0; g < groups; ++g) {
                    const auto w = (*winners)[static_cast<std::size_t>(r * groups + g)];
                    an->grad(r, g * pieces + w) += out->grad(r, g);
                }
            }
        };
    }
    return Var<T>(node);
}

// Layer normalization across each row (no learned affine):
// y = (x - mean) / sqrt(var + eps), statistics per row.
template <typename T>
auto layer_norm_rows(const Var<T>& a, T eps = T(1e-5)) -> Var<T> {
    const auto d = static_cast<T>(a.cols());
    Mat<T> value(a.rows(), a.cols());
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const T mean = a.value().row(r).mean();
        const T var = (a.value().row(r).array() - mean).square().sum() / d;
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(r)] = is;
        value.row(r) = (a.value().row(r).array() - mean) * is;
    }
    auto node = detail::make_node<T>(std::move(value), "layer_norm_rows", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, inv_std, d] {
            an->ensure_grad();
            for (Eigen::Index r = 0; r < out->value.rows(); ++r) {
                const T is = (*inv_std)[static_cast<std::size_t>(r)];
                const T g_mean = out->grad.row(r).mean();
                const T gy_mean = out->grad.row(r).cwiseProduct(out->value.row(r)).sum() / d;
                an->grad.row(r).array() +=
                    is * (out->grad.row(r).array() - g_mean -
                          out->value.row(r).array() * gy_mean);
            }
        };
    }
    return Var<T>(node);
}

// Unfolds [T x F] into overlapping windows [T' x F*K] where T' depends on
// stride and padding; window t starts at row t*stride - pad of the input and
// out-of-range rows contribute zeros. Column layout is tap-major:
// output(t, k*F + f) = input(t*stride - pad + k, f).
template <typename T>
auto unfold_rows(const Var<T>& a, int k, int stride, int pad) -> Var<T> {
    if (k <= 0 || stride <= 0 || pad < 0) {
        throw NumericError("unfold_rows: invalid window/stride/pad");
    }
    const Eigen::Index rows = a.rows();
    const Eigen::Index padded = rows + 2 * static_cast<Eigen::Index>(pad);
    if (padded < k) {
        throw NumericError("unfold_rows: input of " + std::to_string(rows) +
                           " rows too short for window " + std::to_string(k));
    }
    const Eigen::Index out_rows = (padded - k) / stride + 1;
    const Eigen::Index f = a.cols();
    Mat<T> value = Mat<T>::Zero(out_rows, static_cast<Eigen::Index>(k) * f);
    for (Eigen::Index t = 0; t < out_rows; ++t) {
        for (Eigen::Index tap = 0; tap < k; ++tap) {
            const Eigen::Index src = t * stride - pad + tap;
            if (src >= 0 && src < rows) {
                value.row(t).segment(tap * f, f) = a.value().row(src);
            }
        }
    }
    auto node = detail::make_node<T>(std::move(value), "unfold_rows", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, k, stride, pad, f] {
            an->ensure_grad();
            for (Eigen::Index t = 0; t < out->value.rows(); ++t) {
                for (Eigen::Index tap = 0; tap < k; ++tap) {
                    const Eigen::Index src = t * stride - pad + tap;
                    if (src >= 0 && src < an->value.rows()) {
                        an->grad.row(src) += out->grad.row(t).segment(tap * f, f);
                    }
                }
            }
        };
    }
    return Var<T>(node);
}

// 1-D convolution over the row (time) axis. x: [T x F], weight: [K*F x C]
// (tap-major rows matching unfold_rows), bias: [1 x C] or undefined.
// Output: [T' x C].
template <typename T>
auto conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int k, int stride,
            int pad) -> Var<T> {
    if (weight.rows() != static_cast<Eigen::Index>(k) * x.cols()) {
        detail::shape_error("conv1d", x.value(), weight.value());
    }
    Var<T> unfolded = unfold_rows(x, k, stride, pad);
    Var<T> y = matmul(unfolded, weight);
    if (bias.defined()) { y = add_row_broadcast(y, bias); }
    return y;
}

// Mean-pools contiguous windows of the column (time) axis of [C x N]:
// out(c, t) = mean(in(c, t*hop .. t*hop+win-1)); T = 1 + (N - win) / hop.
template <typename T>
auto avg_pool_cols(const Var<T>& a, int win, int hop) -> Var<T> {
    if (win <= 0 || hop <= 0 || a.cols() < win) {
        throw NumericError("avg_pool_cols: input of " + std::to_string(a.cols()) +
                           " columns too short for window " + std::to_string(win));
    }
    const Eigen::Index frames = 1 + (a.cols() - win) / hop;
    Mat<T> value(a.rows(), frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
        value.col(t) = a.value().middleCols(t * hop, win).rowwise().mean();
    }
    auto node = detail::make_node<T>(std::move(value), "avg_pool_cols", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, win, hop] {
            an->ensure_grad();
            const T inv = T(1) / static_cast<T>(win);
            for (Eigen::Index t = 0; t < out->value.cols(); ++t) {
                an->grad.middleCols(t * hop, win).colwise() += out->grad.col(t) * inv;
            }
        };
    }
    return Var<T>(node);
}

// Fused rectify-and-pool: out(c, t) = mean(|in(c, t*hop .. t*hop+win-1)|).
// Equivalent to avg_pool_cols(abs(a), win, hop) without materializing the
// rectified [C x N] intermediate, which dominates memory traffic when N is
// a waveform-length axis.
template <typename T>
auto abs_avg_pool_cols(const Var<T>& a, int win, int hop) -> Var<T> {
    if (win <= 0 || hop <= 0 || a.cols() < win) {
        throw NumericError("abs_avg_pool_cols: input of " + std::to_string(a.cols()) +
                           " columns too short for window " + std::to_string(win));
    }
    const Eigen::Index frames = 1 + (a.cols() - win) / hop;
    Mat<T> value(a.rows(), frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
        value.col(t) = a.value().middleCols(t * hop, win).cwiseAbs().rowwise().mean();
    }
    auto node = detail::make_node<T>(std::move(value), "abs_avg_pool_cols", {a.node()});
    if (node->requires_grad) {
        auto an = a.node();
        auto out = node.get();
        node->backward = [an, out, win, hop] {
            an->ensure_grad();
            const T inv = T(1) / static_cast<T>(win);
            // sign(0) = 0 (subgradient choice at the kink).
            for (Eigen::Index t = 0; t < out->value.cols(); ++t) {
                an->grad.middleCols(t * hop, win).array() +=
                    an->value.middleCols(t * hop, win).array().sign().colwise() *
                    (out->grad.col(t) * inv).array();
            }
        };
    }
    return Var<T>(node);
}

namespace detail {

// Shared packing for the symmetric signal convolution. The folded Hankel
// block holds hc(i, j) = xpad[j0+j+i] + xpad[j0+j+L-1-i] for i < half and the
// centre row hc(half, j) = xpad[j0+j+half], so a length-L symmetric
// correlation becomes a GEMM against (half+1) rows instead of L.
template <typename T>
void pack_folded_hankel(const T* xpad, Eigen::Index j0, Eigen::Index width, Eigen::Index l,
                        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& hc) {
    const Eigen::Index half = (l - 1) / 2;
    using ArrayMap = Eigen::Map<const Eigen::Array<T, 1, Eigen::Dynamic>>;
    for (Eigen::Index i = 0; i < half; ++i) {
        ArrayMap lo(xpad + j0 + i, width);
        ArrayMap hi(xpad + j0 + (l - 1 - i), width);
        hc.row(i).head(width).array() = lo + hi;
    }
    hc.row(half).head(width) = ArrayMap(xpad + j0 + half, width).matrix();
}

}  // namespace detail

// Symmetrized cross-correlation of a fixed signal with a bank of kernels,
// "same" padding. The effective kernel is the even-symmetrized input,
//   ks(c, i) = (kernels(c, i) + kernels(c, L-1-i)) / 2,
// and out(c, j) = sum_i ks(c, i) * x[j + i - (L-1)/2] with x zero outside its
// support. For kernels that are already symmetric (band-pass sinc kernels
// are) the symmetrization is the identity; it is defined for arbitrary input
// so forward and backward stay consistent under elementwise perturbation.
//
// The symmetry folds the GEMM to (L+1)/2 rows, and the folded Hankel operand
// is packed into contiguous blocks (a strided map defeats GEMM packing).
// The signal is a plain buffer (not a Var): only the kernel gradient is
// needed, the waveform is never learned. L must be odd.
template <typename T>
auto signal_conv_symmetric(const std::shared_ptr<std::vector<T>>& xpad, Eigen::Index n_out,
                           const Var<T>& kernels) -> Var<T> {
    const Eigen::Index l = kernels.cols();
    if (static_cast<Eigen::Index>(xpad->size()) != n_out + l - 1) {
        throw NumericError("signal_conv_symmetric: padded signal length " +
                           std::to_string(xpad->size()) + " does not match output " +
                           std::to_string(n_out) + " for kernel length " + std::to_string(l));
    }
    const Eigen::Index half = (l - 1) / 2;
    const Eigen::Index folded = half + 1;
    constexpr Eigen::Index kBlock = 4096;

    // Fold the kernels: kf(c, i) = (k(c, i) + k(c, l-1-i)) / 2, centre as-is.
    Mat<T> kf(kernels.rows(), folded);
    for (Eigen::Index i = 0; i < half; ++i) {
        kf.col(i) = (kernels.value().col(i) + kernels.value().col(l - 1 - i)) * T(0.5);
    }
    kf.col(half) = kernels.value().col(half);

    Mat<T> value(kernels.rows(), n_out);
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> hc(folded, kBlock);
    for (Eigen::Index j0 = 0; j0 < n_out; j0 += kBlock) {
        const Eigen::Index width = std::min(kBlock, n_out - j0);
        detail::pack_folded_hankel(xpad->data(), j0, width, l, hc);
        value.middleCols(j0, width).noalias() = kf * hc.leftCols(width);
    }

    auto node = detail::make_node<T>(std::move(value), "signal_conv_symmetric",
                                     {kernels.node()});
    if (node->requires_grad) {
        auto kn = kernels.node();
        auto out = node.get();
        node->backward = [kn, out, xpad, l, n_out, half, folded] {
            kn->ensure_grad();
            constexpr Eigen::Index kBlock = 4096;
            // Folded kernel gradient, then unfold through the symmetrization.
            Mat<T> dkf = Mat<T>::Zero(out->value.rows(), folded);
            Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> hc(folded,
                                                                                 kBlock);
            for (Eigen::Index j0 = 0; j0 < n_out; j0 += kBlock) {
                const Eigen::Index width = std::min(kBlock, n_out - j0);
                detail::pack_folded_hankel(xpad->data(), j0, width, l, hc);
                dkf.noalias() +=
                    out->grad.middleCols(j0, width) * hc.leftCols(width).transpose();
            }
            for (Eigen::Index i = 0; i < half; ++i) {
                kn->grad.col(i) += dkf.col(i) * T(0.5);
                kn->grad.col(l - 1 - i) += dkf.col(i) * T(0.5);
            }
            kn->grad.col(half) += dkf.col(half);
        };
    }
    return Var<T>(node);
}

// Pads a waveform for signal_conv_symmetric with (L-1)/2 zeros on each side.
template <typename T>
auto pad_signal(const std::vector<T>& x, Eigen::Index l) -> std::shared_ptr<std::vector<T>> {
    const Eigen::Index half = (l - 1) / 2;
    auto padded = std::make_shared<std::vector<T>>(x.size() + static_cast<std::size_t>(l) - 1,
                                                   T(0));
    std::copy(x.begin(), x.end(), padded->begin() + half);
    return padded;
}

}  // namespace deepgesi::ad
