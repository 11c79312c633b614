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

#include "deepgesi/stft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "deepgesi/errors.hpp"

namespace deepgesi {

void StftConfig::validate() const {
    if (win_length <= 0 || win_length > fft_size) {
        throw UsageError("stft: requires 0 < win_length <= fft_size (got win_length " +
                         std::to_string(win_length) + ", fft_size " + std::to_string(fft_size) +
                         ")");
    }
    if (hop_length <= 0 || hop_length > win_length) {
        throw UsageError("stft: requires 0 < hop_length <= win_length (got hop_length " +
                         std::to_string(hop_length) + ", win_length " +
                         std::to_string(win_length) + ")");
    }
}

auto window_kind_from_string(const std::string& name) -> WindowKind {
    if (name == "hann") { return WindowKind::hann; }
    if (name == "hamming") { return WindowKind::hamming; }
    throw UsageError("unknown window kind: " + name + " (expected hann or hamming)");
}

auto to_string(WindowKind kind) -> std::string {
    return kind == WindowKind::hann ? "hann" : "hamming";
}

auto frame_count(long num_samples, int win_length, int hop_length) -> int {
    if (num_samples < win_length) {
        throw DataError("utterance shorter than one analysis window (" +
                        std::to_string(num_samples) + " < " + std::to_string(win_length) +
                        " samples)");
    }
    return 1 + static_cast<int>((num_samples - win_length) / hop_length);
}

auto stft_features(const AudioBuffer& buf, const StftConfig& cfg) -> MatF {
    cfg.validate();
    const auto n = static_cast<long>(buf.samples.size());
    const int frames = frame_count(n, cfg.win_length, cfg.hop_length);
    const int bins = cfg.fft_size / 2 + 1;

    // Periodic analysis windows.
    std::vector<float> window(static_cast<std::size_t>(cfg.win_length));
    for (int i = 0; i < cfg.win_length; ++i) {
        const double phase = 2.0 * std::numbers::pi * i / cfg.win_length;
        const double w = cfg.window == WindowKind::hann ? 0.5 - 0.5 * std::cos(phase)
                                                        : 0.54 - 0.46 * std::cos(phase);
        window[static_cast<std::size_t>(i)] = static_cast<float>(w);
    }

    Eigen::FFT<float> fft;
    fft.SetFlag(Eigen::FFT<float>::HalfSpectrum);
    std::vector<std::complex<float>> spectrum;
    std::vector<float> frame(static_cast<std::size_t>(cfg.fft_size), 0.0F);

    MatF out(frames, bins);
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_length;
        for (int i = 0; i < cfg.win_length; ++i) {
            frame[static_cast<std::size_t>(i)] =
                buf.samples[start + static_cast<std::size_t>(i)] *
                window[static_cast<std::size_t>(i)];
        }
        fft.fwd(spectrum, frame);
        Eigen::Map<const Eigen::ArrayXcf> spec(spectrum.data(), bins);
        out.row(t).array() = (spec.abs2().sqrt() + static_cast<float>(kLogEps)).log();
    }
    return out;
}

}  // namespace deepgesi
