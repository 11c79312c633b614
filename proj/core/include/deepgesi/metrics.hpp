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

#include <vector>

namespace deepgesi {

// Mean squared error. Throws DataError on empty or length-mismatched input.
auto mse(const std::vector<double>& preds, const std::vector<double>& targets) -> double;

// Pearson (linear) correlation coefficient. Throws DataError on empty or
// mismatched input; throws NumericError when either vector is constant
// (undefined variance) rather than returning NaN.
auto lcc(const std::vector<double>& preds, const std::vector<double>& targets) -> double;

// Spearman rank correlation: Pearson correlation of fractional ranks, ties
// assigned the average of the rank positions they occupy.
auto srcc(const std::vector<double>& preds, const std::vector<double>& targets) -> double;

// Fractional (average) ranks, 1-based: [10, 20, 20, 30] -> [1, 2.5, 2.5, 4].
auto fractional_ranks(const std::vector<double>& values) -> std::vector<double>;

}  // namespace deepgesi
