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

#include <cstdint>
#include <string>
#include <vector>

#include "deepgesi/audio.hpp"

namespace deepgesi {

enum class Split { train, val, test, unseen };

auto split_from_string(const std::string& name) -> Split;
auto to_string(Split split) -> std::string;

struct ManifestEntry {
    std::string audio_path;
    double target = 0.0;  // in [0, 1]
    Split split = Split::train;
};

// Reads a CSV manifest with header `audio_path,target,split`. Relative audio
// paths are resolved against the manifest's directory. Throws DataError for
// a missing file, a malformed row (reported with its row number), a target
// outside [0, 1], or an empty manifest.
auto load_manifest(const std::string& path) -> std::vector<ManifestEntry>;

// Writes entries to a CSV manifest (atomic write-then-rename).
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Deterministically partitions entries into train/val/test by the given
// ratios: shuffle with `seed`, then sizes round(n * ratio) for val and test
// with the remainder to train. Requires at least 10 entries.
struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitResult {
    std::vector<ManifestEntry> train;
    std::vector<ManifestEntry> val;
    std::vector<ManifestEntry> test;
};

auto split_dataset(const std::vector<ManifestEntry>& entries, const SplitRatios& ratios,
                   std::uint64_t seed) -> SplitResult;

// ---------------------------------------------------------------------------
// Synthetic desk-scale dataset with an intrusive oracle target
// ---------------------------------------------------------------------------
//
// Each utterance is a "clean" carrier (four random tones plus a slowly
// modulated noise component) mixed with white noise at an SNR drawn from
// [-10, +15] dB. The target is an envelope-similarity score: the mean over 8
// octave-spaced bands of the Pearson correlation between the clean and
// degraded band envelopes, affinely mapped to [0, 1]. It is a stand-in
// reference metric so the training and evaluation machinery is testable end
// to end; it is NOT an implementation of any published intelligibility
// metric.

struct SynthUtterance {
    std::vector<float> clean;
    std::vector<float> degraded;
    double snr_db = 0.0;
    double target = 0.0;
};

// Generates one utterance deterministically from a sub-seed.
auto synth_utterance(std::uint64_t seed) -> SynthUtterance;

// Mean octave-band envelope correlation between a reference and a degraded
// signal (both same length, 16 kHz), before the affine calibration map.
auto oracle_band_correlation(const std::vector<float>& clean, const std::vector<float>& degraded)
    -> double;

// Affine calibration: clamp((s - floor) / (1 - floor), 0, 1). The floor is
// the Monte-Carlo-estimated correlation between a clean carrier and an
// INDEPENDENT noise signal, so unrelated audio maps to ~0.
auto oracle_calibrate(double band_correlation) -> double;

// Full oracle: band correlation followed by calibration.
auto oracle_score(const std::vector<float>& clean, const std::vector<float>& degraded) -> double;

// Generates n utterances (PCM-16 WAVs at 16 kHz) under out_dir plus a
// manifest.csv with oracle targets and an 80/10/10 train/val/test split.
// Deterministic per seed: per-utterance sub-seeds come from splitmix64, so
// the same (n, seed) yields byte-identical WAVs and targets. Returns the
// manifest path.
auto synth_dataset(int n, std::uint64_t seed, const std::string& out_dir) -> std::string;

}  // namespace deepgesi
