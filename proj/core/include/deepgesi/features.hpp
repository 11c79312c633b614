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

#include "deepgesi/audio.hpp"
#include "deepgesi/autodiff.hpp"
#include "deepgesi/sinc.hpp"
#include "deepgesi/stft.hpp"

namespace deepgesi {

// Learnable sinc filterbank: geometry plus the two unconstrained parameter
// vectors (interpreted through reparameterize_cutoffs).
struct SincFilterbank {
    SincGeometry geom;
    std::vector<double> low_hz;
    std::vector<double> band_hz;

    static auto mel_initialized(const SincGeometry& geom) -> SincFilterbank {
        SincFilterbank fb;
        fb.geom = geom;
        auto [low, band] = mel_init_cutoffs(geom);
        fb.low_hz = std::move(low);
        fb.band_hz = std::move(band);
        return fb;
    }
};

// The two time-aligned feature streams for one utterance.
struct FeaturePair {
    MatF stft_feats;  // [T x F]
    MatF lfb_feats;   // [T x C]
    int num_frames = 0;
};

// Differentiable LFB feature pipeline: band-pass conv ("same" padding) with
// the generated sinc kernels, rectify, average-pool to frames, log-compress.
// Returns [T x C]. The waveform is a constant; gradients flow only to the
// cutoff parameters.
template <typename T>
auto lfb_features_var(const std::vector<T>& samples, const ad::Var<T>& low_hz,
                      const ad::Var<T>& band_hz, const SincGeometry& geom) -> ad::Var<T> {
    if (static_cast<int>(samples.size()) < geom.frame_win) {
        throw DataError("utterance shorter than one analysis window (" +
                        std::to_string(samples.size()) + " < " +
                        std::to_string(geom.frame_win) + " samples)");
    }
    ad::Var<T> kernels = sinc_kernels(low_hz, band_hz, geom);
    auto padded = ad::pad_signal(samples, geom.kernel_length);
    ad::Var<T> conv =
        ad::signal_conv_symmetric(padded, static_cast<Eigen::Index>(samples.size()), kernels);
    ad::Var<T> pooled = ad::abs_avg_pool_cols(conv, geom.frame_win, geom.frame_hop);
    ad::Var<T> compressed = ad::log_eps(pooled, static_cast<T>(kLogEps));
    return ad::transpose(compressed);  // [T x C]
}

// Non-differentiable convenience wrapper around the same pipeline.
auto lfb_features(const AudioBuffer& buf, const SincFilterbank& fb) -> MatF;

// Trims both streams to the shared frame count T = min(T_stft, T_lfb).
// A difference greater than 1 frame indicates inconsistent framing
// configuration and raises DataError.
auto align(const MatF& stft_feats, const MatF& lfb_feats) -> FeaturePair;

}  // namespace deepgesi
