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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "deepgesi/errors.hpp"
#include "deepgesi/features.hpp"
#include "deepgesi/rng.hpp"
#include "deepgesi/sinc.hpp"
#include "deepgesi/stft.hpp"
#include "support/naive_dft.hpp"

using namespace deepgesi;
using namespace testsupport;

namespace {

auto random_signal(int n, std::uint64_t seed, double amp = 0.5) -> std::vector<float> {
    Rng rng(seed);
    std::vector<float> x(static_cast<std::size_t>(n));
    for (auto& v : x) { v = static_cast<float>(rng.uniform(-amp, amp)); }
    return x;
}

// Frame-by-frame log-magnitude spectrogram computed with the O(n^2) DFT.
auto naive_stft_magnitudes(const std::vector<float>& x, const StftConfig& cfg)
    -> std::vector<std::vector<double>> {
    const int frames =
        1 + static_cast<int>((static_cast<long>(x.size()) - cfg.win_length) / cfg.hop_length);
    const int bins = cfg.fft_size / 2 + 1;
    std::vector<std::vector<double>> out;
    for (int t = 0; t < frames; ++t) {
        std::vector<double> frame(static_cast<std::size_t>(cfg.fft_size), 0.0);
        for (int i = 0; i < cfg.win_length; ++i) {
            const double w =
                cfg.window == WindowKind::hann
                    ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win_length)
                    : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / cfg.win_length);
            frame[static_cast<std::size_t>(i)] =
                static_cast<double>(
                    x[static_cast<std::size_t>(t) * cfg.hop_length + static_cast<std::size_t>(i)]) *
                w;
        }
        const auto spectrum = naive_dft(frame);
        std::vector<double> mags(static_cast<std::size_t>(bins));
        for (int k = 0; k < bins; ++k) {
            mags[static_cast<std::size_t>(k)] = std::abs(spectrum[static_cast<std::size_t>(k)]);
        }
        out.push_back(std::move(mags));
    }
    return out;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("frame_count matches 1 + floor((n - win) / hop)") {
    CHECK(frame_count(400, 400, 160) == 1);
    CHECK(frame_count(559, 400, 160) == 1);
    CHECK(frame_count(560, 400, 160) == 2);
    CHECK(frame_count(96000, 400, 160) == 598);
    CHECK_THROWS_AS(frame_count(399, 400, 160), DataError);
}

TEST_CASE("stft magnitudes match the naive DFT") {
    StftConfig cfg;  // 400 / 160 / 512, hann
    AudioBuffer buf;
    buf.samples = random_signal(1200, 99);
    buf.sample_rate_hz = 16000;
    const MatF feats = stft_features(buf, cfg);
    const auto expected = naive_stft_magnitudes(buf.samples, cfg);

    REQUIRE(feats.rows() == static_cast<Eigen::Index>(expected.size()));
    REQUIRE(feats.cols() == cfg.fft_size / 2 + 1);
    for (Eigen::Index t = 0; t < feats.rows(); ++t) {
        double frame_max = 1e-12;
        for (double m : expected[static_cast<std::size_t>(t)]) {
            frame_max = std::max(frame_max, m);
        }
        for (Eigen::Index k = 0; k < feats.cols(); ++k) {
            // Compare in the magnitude domain; the log is ill-conditioned at
            // spectral nulls where float FFT noise dominates.
            const double got = std::exp(static_cast<double>(feats(t, k))) - kLogEps;
            const double want =
                expected[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
            CHECK(std::abs(got - want) <= 1e-3 * frame_max + 1e-5);
        }
    }
}

TEST_CASE("a 1 kHz tone at 16 kHz peaks in bin 32 of a 512-point analysis") {
    StftConfig cfg;
    AudioBuffer buf;
    buf.samples.resize(1600);
    for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        buf.samples[i] = static_cast<float>(
            0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0));
    }
    buf.sample_rate_hz = 16000;
    const MatF feats = stft_features(buf, cfg);
    for (Eigen::Index t = 0; t < feats.rows(); ++t) {
        Eigen::Index peak = 0;
        feats.row(t).maxCoeff(&peak);
        CHECK(peak == 32);  // 1000 Hz * 512 / 16000 Hz
    }
}

TEST_CASE("stft config validation") {
    StftConfig cfg;
    cfg.win_length = 600;  // > fft_size
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = StftConfig{};
    cfg.hop_length = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    CHECK_THROWS_AS(window_kind_from_string("blackman"), UsageError);
    CHECK(window_kind_from_string("hann") == WindowKind::hann);
    CHECK(to_string(WindowKind::hamming) == "hamming");
}

TEST_CASE("band-pass kernels are symmetric and cancel at f1 == f2") {
    const auto k = sinc_kernel_row<double>(300.0, 1200.0, 129, 16000);
    REQUIRE(k.size() == 129);
    for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]).epsilon(1e-14));
    }
    const auto zero = sinc_kernel_row<double>(700.0, 700.0, 129, 16000);
    for (double v : zero) { CHECK(v == 0.0); }
}

TEST_CASE("band-pass kernels pass the band and reject outside it") {
    const int sr = 16000;
    struct Band {
        double f1;
        double f2;
    };
    for (const Band band : {Band{200.0, 500.0}, Band{1000.0, 2000.0}, Band{3000.0, 6000.0}}) {
        const auto k = sinc_kernel_row<double>(band.f1, band.f2, 129, sr);
        const double center = dtft_magnitude(k, (band.f1 + band.f2) / 2.0, sr);
        const double below = dtft_magnitude(k, band.f1 / 2.0, sr);
        const double dc = dtft_magnitude(k, 0.0, sr);
        CHECK(center > 4.0 * below);
        CHECK(center > 10.0 * dc);
    }
}

TEST_CASE("cutoff reparameterization keeps 0 < f1 < f2 <= nyquist for any input") {
    SincGeometry geom;
    SUBCASE("nominal values") {
        const auto cut = reparameterize_cutoffs(250.0, 500.0, geom);
        CHECK(cut.f1 == doctest::Approx(300.0));  // min_hz + |low|
        CHECK(cut.f2 == doctest::Approx(801.0));  // f1 + 1 + |band|
        CHECK_FALSE(cut.f1_capped);
        CHECK_FALSE(cut.f2_capped);
    }
    SUBCASE("negative parameters act through their magnitude") {
        const auto pos = reparameterize_cutoffs(250.0, 500.0, geom);
        const auto neg = reparameterize_cutoffs(-250.0, -500.0, geom);
        CHECK(pos.f1 == neg.f1);
        CHECK(pos.f2 == neg.f2);
    }
    SUBCASE("extreme values hit the caps but keep the ordering") {
        const auto cut = reparameterize_cutoffs(1e9, 1e9, geom);
        CHECK(cut.f1 == doctest::Approx(8000.0 - geom.min_hz));
        CHECK(cut.f2 == doctest::Approx(8000.0));
        CHECK(cut.f1_capped);
        CHECK(cut.f2_capped);
        CHECK(cut.f1 < cut.f2);
    }
    SUBCASE("zero parameters give the narrowest band at min_hz") {
        const auto cut = reparameterize_cutoffs(0.0, 0.0, geom);
        CHECK(cut.f1 == doctest::Approx(geom.min_hz));
        CHECK(cut.f2 == doctest::Approx(geom.min_hz + 1.0));
    }
}

TEST_CASE("mel initialization spans min_hz to just under nyquist, strictly ordered") {
    SincGeometry geom;
    const auto [low, band] = mel_init_cutoffs(geom);
    REQUIRE(low.size() == 64);
    REQUIRE(band.size() == 64);
    double prev_f2 = 0.0;
    for (std::size_t i = 0; i < low.size(); ++i) {
        const auto cut = reparameterize_cutoffs(low[i], band[i], geom);
        CHECK(cut.f1 < cut.f2);
        CHECK_FALSE(cut.f2_capped);
        if (i > 0) { CHECK(cut.f1 > prev_f2 - 2.0); }  // contiguous band edges
        prev_f2 = cut.f2;
    }
    const auto first = reparameterize_cutoffs(low.front(), band.front(), geom);
    CHECK(first.f1 == doctest::Approx(geom.min_hz));
    const auto last = reparameterize_cutoffs(low.back(), band.back(), geom);
    CHECK(last.f2 == doctest::Approx(7999.0).epsilon(1e-6));
}

TEST_CASE("learnable filterbank features match a direct loop computation") {
    SincGeometry geom;
    geom.num_filters = 3;
    geom.kernel_length = 9;
    geom.frame_win = 16;
    geom.frame_hop = 8;
    const int n = 64;

    Rng rng(7);
    MatD low(1, 3);
    MatD band(1, 3);
    for (int i = 0; i < 3; ++i) {
        low(0, i) = rng.uniform(100.0, 2000.0);
        band(0, i) = rng.uniform(200.0, 3000.0);
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) { v = rng.uniform(-0.5, 0.5); }

    auto low_var = ad::Var<double>::leaf(low);
    auto band_var = ad::Var<double>::leaf(band);
    const auto got = lfb_features_var<double>(x, low_var, band_var, geom);

    // Direct reference: reparameterize, generate kernels, symmetrize,
    // zero-padded "same" cross-correlation, rectify, mean-pool, log.
    const int l = geom.kernel_length;
    const int half = (l - 1) / 2;
    const int frames = 1 + (n - geom.frame_win) / geom.frame_hop;
    REQUIRE(got.rows() == frames);
    REQUIRE(got.cols() == 3);
    for (int c = 0; c < 3; ++c) {
        const auto cut = reparameterize_cutoffs(low(0, c), band(0, c), geom);
        const auto kernel = sinc_kernel_row<double>(cut.f1, cut.f2, l, geom.sample_rate_hz);
        std::vector<double> y(static_cast<std::size_t>(n), 0.0);
        for (int t = 0; t < n; ++t) {
            double acc = 0.0;
            for (int i = 0; i < l; ++i) {
                const int src = t + i - half;
                if (src < 0 || src >= n) { continue; }
                const double ks =
                    0.5 * (kernel[static_cast<std::size_t>(i)] +
                           kernel[static_cast<std::size_t>(l - 1 - i)]);
                acc += ks * x[static_cast<std::size_t>(src)];
            }
            y[static_cast<std::size_t>(t)] = acc;
        }
        for (int t = 0; t < frames; ++t) {
            double pooled = 0.0;
            for (int i = 0; i < geom.frame_win; ++i) {
                pooled += std::abs(y[static_cast<std::size_t>(t * geom.frame_hop + i)]);
            }
            pooled /= geom.frame_win;
            const double want = std::log(pooled + kLogEps);
            CHECK(got.value()(t, c) == doctest::Approx(want).epsilon(1e-10));
        }
    }
}

TEST_CASE("filterbank features reject too-short input") {
    SincGeometry geom;
    std::vector<double> shorty(static_cast<std::size_t>(geom.frame_win - 1), 0.1);
    auto low = ad::Var<double>::leaf(MatD::Zero(1, geom.num_filters));
    auto band = ad::Var<double>::leaf(MatD::Constant(1, geom.num_filters, 100.0));
    CHECK_THROWS_AS(lfb_features_var<double>(shorty, low, band, geom), DataError);
}

TEST_CASE("align trims at most one frame of mismatch") {
    MatF a = MatF::Random(10, 4);
    MatF b = MatF::Random(10, 3);
    SUBCASE("equal lengths pass through") {
        const auto pair = align(a, b);
        CHECK(pair.num_frames == 10);
        CHECK((pair.stft_feats - a).cwiseAbs().maxCoeff() == 0.0F);
        CHECK((pair.lfb_feats - b).cwiseAbs().maxCoeff() == 0.0F);
    }
    SUBCASE("off-by-one trims to the shorter stream") {
        MatF b9 = b.topRows(9);
        const auto pair = align(a, b9);
        CHECK(pair.num_frames == 9);
        CHECK(pair.stft_feats.rows() == 9);
    }
    SUBCASE("larger mismatch is a framing bug") {
        MatF b8 = b.topRows(8);
        CHECK_THROWS_AS(align(a, b8), DataError);
    }
}

}  // TEST_SUITE
