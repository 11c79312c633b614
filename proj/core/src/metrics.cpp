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

#include "deepgesi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deepgesi/errors.hpp"

namespace deepgesi {

namespace {

void check_lengths(const std::vector<double>& preds, const std::vector<double>& targets,
                   const char* op, std::size_t min_len) {
    if (preds.size() != targets.size()) {
        throw DataError(std::string(op) + ": length mismatch (" + std::to_string(preds.size()) +
                        " vs " + std::to_string(targets.size()) + ")");
    }
    if (preds.size() < min_len) {
        throw DataError(std::string(op) + ": need at least " + std::to_string(min_len) +
                        " pairs, got " + std::to_string(preds.size()));
    }
}

auto pearson(const std::vector<double>& a, const std::vector<double>& b, const char* op)
    -> double {
    const auto n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw NumericError(std::string(op) + ": correlation undefined for a constant vector (" +
                           (var_a == 0.0 ? "first" : "second") + " argument has zero variance)");
    }
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace

auto mse(const std::vector<double>& preds, const std::vector<double>& targets) -> double {
    check_lengths(preds, targets, "mse", 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(preds.size());
}

auto lcc(const std::vector<double>& preds, const std::vector<double>& targets) -> double {
    check_lengths(preds, targets, "lcc", 2);
    return pearson(preds, targets, "lcc");
}

auto fractional_ranks(const std::vector<double>& values) -> std::vector<double> {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) { ++j; }
        // Positions i..j (0-based) share the average 1-based rank.
        const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) { ranks[order[k]] = avg_rank; }
        i = j + 1;
    }
    return ranks;
}

auto srcc(const std::vector<double>& preds, const std::vector<double>& targets) -> double {
    check_lengths(preds, targets, "srcc", 2);
    return pearson(fractional_ranks(preds), fractional_ranks(targets), "srcc");
}

}  // namespace deepgesi
