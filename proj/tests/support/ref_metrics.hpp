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
#include <cstddef>
#include <vector>

namespace testsupport {

// Deliberately naive reference implementations of the evaluation metrics,
// written independently of the library (long-double accumulation, O(n^2)
// ranking) so the two can be compared as oracles.

inline auto ref_mse(const std::vector<double>& a, const std::vector<double>& b) -> double {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
        acc += d * d;
    }
    return static_cast<double>(acc / static_cast<long double>(a.size()));
}

inline auto ref_pearson(const std::vector<double>& a, const std::vector<double>& b) -> double {
    const auto n = static_cast<long double>(a.size());
    long double ma = 0.0L;
    long double mb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double num = 0.0L;
    long double da = 0.0L;
    long double db = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double xa = a[i] - ma;
        const long double xb = b[i] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    return static_cast<double>(num / std::sqrt(da * db));
}

// Fractional (average) 1-based ranks by exhaustive comparison:
// rank_i = (#values below) + (#values equal + 1) / 2.
inline auto ref_ranks(const std::vector<double>& v) -> std::vector<double> {
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t below = 0;
        std::size_t equal = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) { ++below; }
            if (v[j] == v[i]) { ++equal; }
        }
        ranks[i] = static_cast<double>(below) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return ranks;
}

inline auto ref_spearman(const std::vector<double>& a, const std::vector<double>& b) -> double {
    return ref_pearson(ref_ranks(a), ref_ranks(b));
}

}  // namespace testsupport
