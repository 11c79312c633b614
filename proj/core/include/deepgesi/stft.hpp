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

#include <string>

#include "deepgesi/audio.hpp"
#include "deepgesi/mat.hpp"

namespace deepgesi {

enum class WindowKind { hann, hamming };

struct StftConfig {
    int win_length = 400;   // 25 ms at 16 kHz
    int hop_length = 160;   // 10 ms at 16 kHz
    int fft_size = 512;
    WindowKind window = WindowKind::hann;

    void validate() const;
};

auto window_kind_from_string(const std::string& name) -> WindowKind;
auto to_string(WindowKind kind) -> std::string;

// Number of analysis frames for a signal of `num_samples` samples:
// 1 + floor((n - win) / hop). Throws DataError when n < win.
auto frame_count(long num_samples, int win_length, int hop_length) -> int;

// Log-magnitude STFT features, shape [T x (fft_size/2 + 1)]; each entry is
// log(|X| + 1e-8).
auto stft_features(const AudioBuffer& buf, const StftConfig& cfg) -> MatF;

constexpr double kLogEps = 1e-8;

}  // namespace deepgesi
