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

#include <cmath>

#include "deepgesi/autodiff.hpp"
#include "deepgesi/mat.hpp"

namespace deepgesi {

// Rotary position embedding. Row t of a [T x d] matrix is treated as d/2
// two-dimensional blocks; block i is rotated by angle t * theta_i with
// theta_i = 10000^(-2i/d). Attention scores between rotated queries and keys
// then depend only on relative displacement: R(t)^T R(s) = R(s - t).
template <typename T>
struct RopeTable {
    Mat<T> cos_table;  // [T x d/2]
    Mat<T> sin_table;  // [T x d/2]

    // Positions start_pos .. start_pos + t_len - 1 for width d (even).
    static auto build(Eigen::Index t_len, Eigen::Index d, Eigen::Index start_pos = 0)
        -> RopeTable {
        if (d % 2 != 0) {
            throw NumericError("rope: width must be even, got " + std::to_string(d));
        }
        const Eigen::Index half = d / 2;
        RopeTable table;
        table.cos_table.resize(t_len, half);
        table.sin_table.resize(t_len, half);
        for (Eigen::Index i = 0; i < half; ++i) {
            const double theta =
                std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            for (Eigen::Index t = 0; t < t_len; ++t) {
                const double angle = static_cast<double>(start_pos + t) * theta;
                table.cos_table(t, i) = static_cast<T>(std::cos(angle));
                table.sin_table(t, i) = static_cast<T>(std::sin(angle));
            }
        }
        return table;
    }
};

// Applies the rotation to every row. Backward is the inverse rotation of the
// output gradient (the rotation matrix is orthonormal).
template <typename T>
auto apply_rope(const ad::Var<T>& x, const RopeTable<T>& table) -> ad::Var<T> {
    const Eigen::Index rows = x.rows();
    const Eigen::Index d = x.cols();
    if (d % 2 != 0) {
        throw NumericError("rope: width must be even, got " + std::to_string(d));
    }
    if (table.cos_table.rows() < rows || table.cos_table.cols() != d / 2) {
        throw NumericError("rope: table " + std::to_string(table.cos_table.rows()) + "x" +
                           std::to_string(table.cos_table.cols()) + " cannot serve input " +
                           std::to_string(rows) + "x" + std::to_string(d));
    }
    const Eigen::Index half = d / 2;
    Mat<T> value(rows, d);
    for (Eigen::Index t = 0; t < rows; ++t) {
        for (Eigen::Index i = 0; i < half; ++i) {
            const T c = table.cos_table(t, i);
            const T s = table.sin_table(t, i);
            const T even = x.value()(t, 2 * i);
            const T odd = x.value()(t, 2 * i + 1);
            value(t, 2 * i) = even * c - odd * s;
            value(t, 2 * i + 1) = even * s + odd * c;
        }
    }
    auto node = ad::detail::make_node<T>(std::move(value), "rope", {x.node()});
    if (node->requires_grad) {
        auto xn = x.node();
        auto out = node.get();
        auto cos_copy = table.cos_table;  // keep the table alive for backward
        auto sin_copy = table.sin_table;
        node->backward = [xn, out, cos_copy, sin_copy, half] {
            xn->ensure_grad();
            for (Eigen::Index t = 0; t < out->value.rows(); ++t) {
                for (Eigen::Index i = 0; i < half; ++i) {
                    const T c = cos_copy(t, i);
                    const T s = sin_copy(t, i);
                    const T g_even = out->grad(t, 2 * i);
                    const T g_odd = out->grad(t, 2 * i + 1);
                    xn->grad(t, 2 * i) += g_even * c + g_odd * s;
                    xn->grad(t, 2 * i + 1) += -g_even * s + g_odd * c;
                }
            }
        };
    }
    return ad::Var<T>(node);
}

}  // namespace deepgesi
