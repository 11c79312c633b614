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

#include "deepgesi/features.hpp"

#include <algorithm>

#include "deepgesi/errors.hpp"

namespace deepgesi {

auto lfb_features(const AudioBuffer& buf, const SincFilterbank& fb) -> MatF {
    const Eigen::Index c = fb.geom.num_filters;
    MatF low(1, c);
    MatF band(1, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        low(0, i) = static_cast<float>(fb.low_hz[static_cast<std::size_t>(i)]);
        band(0, i) = static_cast<float>(fb.band_hz[static_cast<std::size_t>(i)]);
    }
    auto low_var = ad::Var<float>::leaf(std::move(low));
    auto band_var = ad::Var<float>::leaf(std::move(band));
    return lfb_features_var<float>(buf.samples, low_var, band_var, fb.geom).value();
}

auto align(const MatF& stft_feats, const MatF& lfb_feats) -> FeaturePair {
    const Eigen::Index t_stft = stft_feats.rows();
    const Eigen::Index t_lfb = lfb_feats.rows();
    if (std::abs(t_stft - t_lfb) > 1) {
        throw DataError("feature frame counts diverge (" + std::to_string(t_stft) +
                        " STFT vs " + std::to_string(t_lfb) +
                        " LFB frames); framing configuration is inconsistent");
    }
    const Eigen::Index t = std::min(t_stft, t_lfb);
    if (t == 0) { throw DataError("feature alignment produced zero frames"); }
    FeaturePair pair;
    pair.stft_feats = stft_feats.topRows(t);
    pair.lfb_feats = lfb_feats.topRows(t);
    pair.num_frames = static_cast<int>(t);
    return pair;
}

}  // namespace deepgesi
