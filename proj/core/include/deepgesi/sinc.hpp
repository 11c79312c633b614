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
#include <numbers>
#include <utility>
#include <vector>

#include "deepgesi/autodiff.hpp"
#include "deepgesi/mat.hpp"

namespace deepgesi {

// Geometry of the learnable sinc filterbank: everything except the two
// learnable cutoff vectors themselves.
struct SincGeometry {
    int num_filters = 64;     // C
    int kernel_length = 129;  // L, odd
    int frame_win = 400;      // pooling window matching the STFT framing
    int frame_hop = 160;
    int sample_rate_hz = 16000;
    double min_hz = 50.0;  // lower bound of the reparameterized f1

    void validate() const {
        if (num_filters <= 0) { throw UsageError("sinc: num_filters must be positive"); }
        if (kernel_length <= 0 || kernel_length % 2 == 0) {
            throw UsageError("sinc: kernel_length must be odd and positive, got " +
                             std::to_string(kernel_length));
        }
        if (sample_rate_hz <= 0) { throw UsageError("sinc: sample rate must be positive"); }
    }
};

// The reparameterization mapping unconstrained (low_hz, band_hz) to
// effective cutoffs with 0 < f1 < f2 <= sample_rate/2 for ANY input values:
//   f1 = min(min_hz + |low_hz|, nyquist - min_hz)
//   f2 = min(f1 + 1 + |band_hz|, nyquist)
// The cap on f1 and the 1 Hz bandwidth floor keep the ordering strict even
// at extreme parameter values; the caps sit far outside the mel-initialized
// operating range, so gradients are unaffected in normal training.
struct SincCutoffs {
    double f1 = 0.0;
    double f2 = 0.0;
    bool f1_capped = false;
    bool f2_capped = false;
};

inline auto reparameterize_cutoffs(double low_hz, double band_hz, const SincGeometry& geom)
    -> SincCutoffs {
    const double nyquist = geom.sample_rate_hz / 2.0;
    SincCutoffs cut;
    const double f1_raw = geom.min_hz + std::abs(low_hz);
    const double f1_cap = nyquist - geom.min_hz;
    cut.f1_capped = f1_raw >= f1_cap;
    cut.f1 = cut.f1_capped ? f1_cap : f1_raw;
    const double f2_raw = cut.f1 + 1.0 + std::abs(band_hz);
    cut.f2_capped = f2_raw >= nyquist;
    cut.f2 = cut.f2_capped ? nyquist : f2_raw;
    return cut;
}

// Band-pass impulse response for explicit cutoffs (no reparameterization):
//   g[n] = (2*F2*sinc(2*pi*F2*n) - 2*F1*sinc(2*pi*F1*n)) * w[n]
// with F = f/sample_rate, n symmetric in [-(L-1)/2, (L-1)/2], sinc(0) = 1 by
// the limit, and w a symmetric Hamming window. f1 == f2 cancels to the zero
// kernel exactly. Used directly by tests; training uses sinc_kernels below.
template <typename T>
auto sinc_kernel_row(double f1_hz, double f2_hz, int kernel_length, int sample_rate_hz)
    -> std::vector<T> {
    const int half = (kernel_length - 1) / 2;
    const double fn1 = f1_hz / sample_rate_hz;
    const double fn2 = f2_hz / sample_rate_hz;
    std::vector<T> kernel(static_cast<std::size_t>(kernel_length));
    for (int idx = 0; idx < kernel_length; ++idx) {
        const int n = idx - half;
        // Symmetric Hamming taper: 1.0 at center, 0.08 at the ends.
        const double w =
            0.54 + 0.46 * std::cos(2.0 * std::numbers::pi * n / (kernel_length - 1));
        double g = 0.0;
        if (n == 0) {
            g = 2.0 * (fn2 - fn1);
        } else {
            // 2F*sinc(2*pi*F*n) = sin(2*pi*F*n) / (pi*n)
            const double pn = std::numbers::pi * n;
            g = (std::sin(2.0 * std::numbers::pi * fn2 * n) -
                 std::sin(2.0 * std::numbers::pi * fn1 * n)) /
                pn;
        }
        kernel[static_cast<std::size_t>(idx)] = static_cast<T>(g * w);
    }
    return kernel;
}

// Differentiable kernel bank [C x L] from unconstrained parameter rows
// low_hz, band_hz (each [1 x C]). Forward applies the reparameterization and
// the windowed band-pass formula; backward chains through both analytically:
//   d g[n] / d F2 =  2 cos(2*pi*F2*n) * w[n]   (also valid at n = 0)
//   d g[n] / d F1 = -2 cos(2*pi*F1*n) * w[n]
// with dF/d(parameter) given by the absolute-value sign and the cap
// indicators. sign(0) = 0 at the kinks.
template <typename T>
auto sinc_kernels(const ad::Var<T>& low_hz, const ad::Var<T>& band_hz,
                  const SincGeometry& geom) -> ad::Var<T> {
    geom.validate();
    const Eigen::Index c = low_hz.cols();
    if (low_hz.rows() != 1 || band_hz.rows() != 1 || band_hz.cols() != c ||
        c != geom.num_filters) {
        ad::detail::shape_error("sinc_kernels", low_hz.value(), band_hz.value());
    }
    const int l = geom.kernel_length;
    const int half = (l - 1) / 2;
    const double sr = geom.sample_rate_hz;

    auto cuts = std::make_shared<std::vector<SincCutoffs>>(static_cast<std::size_t>(c));
    Mat<T> value(c, l);
    for (Eigen::Index f = 0; f < c; ++f) {
        auto& cut = (*cuts)[static_cast<std::size_t>(f)];
        cut = reparameterize_cutoffs(static_cast<double>(low_hz.value()(0, f)),
                                     static_cast<double>(band_hz.value()(0, f)), geom);
        const auto row = sinc_kernel_row<T>(cut.f1, cut.f2, l, geom.sample_rate_hz);
        for (int idx = 0; idx < l; ++idx) { value(f, idx) = row[static_cast<std::size_t>(idx)]; }
    }

    auto node =
        ad::detail::make_node<T>(std::move(value), "sinc_kernels", {low_hz.node(), band_hz.node()});
    if (node->requires_grad) {
        auto low_node = low_hz.node();
        auto band_node = band_hz.node();
        auto out = node.get();
        node->backward = [low_node, band_node, out, cuts, l, half, sr] {
            const Eigen::Index c = out->value.rows();
            for (Eigen::Index f = 0; f < c; ++f) {
                const auto& cut = (*cuts)[static_cast<std::size_t>(f)];
                const double fn1 = cut.f1 / sr;
                const double fn2 = cut.f2 / sr;
                double d_f1 = 0.0;  // dL/dF1 and dL/dF2 (normalized frequencies)
                double d_f2 = 0.0;
                for (int idx = 0; idx < l; ++idx) {
                    const int n = idx - half;
                    const double w =
                        0.54 + 0.46 * std::cos(2.0 * std::numbers::pi * n / (l - 1));
                    const double g = static_cast<double>(out->grad(f, idx)) * w;
                    d_f2 += g * 2.0 * std::cos(2.0 * std::numbers::pi * fn2 * n);
                    d_f1 -= g * 2.0 * std::cos(2.0 * std::numbers::pi * fn1 * n);
                }
                // Chain through the reparameterization, in Hz units.
                const double d_f1_hz = d_f1 / sr;
                const double d_f2_hz = cut.f2_capped ? 0.0 : d_f2 / sr;
                if (low_node->requires_grad) {
                    low_node->ensure_grad();
                    const double u = static_cast<double>(low_node->value(0, f));
                    const double sign_u = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
                    // f2 tracks f1 unless f2 itself is capped; a capped f1
                    // stops depending on the parameter entirely.
                    const double du = cut.f1_capped ? 0.0 : (d_f1_hz + d_f2_hz);
                    low_node->grad(0, f) += static_cast<T>(du * sign_u);
                }
                if (band_node->requires_grad) {
                    band_node->ensure_grad();
                    const double v = static_cast<double>(band_node->value(0, f));
                    const double sign_v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                    band_node->grad(0, f) += static_cast<T>(d_f2_hz * sign_v);
                }
            }
        };
    }
    return ad::Var<T>(node);
}

// Mel-scale initial cutoffs spanning [min_hz, nyquist]: returns unconstrained
// (low_hz, band_hz) values that reparameterize to C bands whose edges are
// equally spaced on the mel scale.
inline auto mel_init_cutoffs(const SincGeometry& geom)
    -> std::pair<std::vector<double>, std::vector<double>> {
    const auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    const auto from_mel = [](double mel) {
        return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    };
    const double nyquist = geom.sample_rate_hz / 2.0;
    const double mel_lo = to_mel(geom.min_hz);
    // Top edge sits 1 Hz under Nyquist so no filter starts on the f2 cap
    // (a capped cutoff would begin training with zero gradient).
    const double mel_hi = to_mel(nyquist - 1.0);
    const int c = geom.num_filters;
    std::vector<double> low(static_cast<std::size_t>(c));
    std::vector<double> band(static_cast<std::size_t>(c));
    // C + 1 mel-equidistant edge points; filter f covers [edge_f, edge_{f+1}].
    for (int f = 0; f < c; ++f) {
        const double edge_lo = from_mel(mel_lo + (mel_hi - mel_lo) * f / static_cast<double>(c));
        const double edge_hi =
            from_mel(mel_lo + (mel_hi - mel_lo) * (f + 1) / static_cast<double>(c));
        // Invert the reparameterization: f1 = min_hz + low, f2 = f1 + 1 + band.
        low[static_cast<std::size_t>(f)] = std::max(0.0, edge_lo - geom.min_hz);
        band[static_cast<std::size_t>(f)] = std::max(0.0, edge_hi - edge_lo - 1.0);
    }
    return {low, band};
}

}  // namespace deepgesi
