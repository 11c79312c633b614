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

#include <optional>
#include <string>
#include <vector>

#include "deepgesi/checkpoint.hpp"
#include "deepgesi/config.hpp"
#include "deepgesi/labels.hpp"
#include "deepgesi/model.hpp"
#include "deepgesi/training.hpp"

namespace deepgesi {

// Builds a float32 inference model from a checkpoint: the architecture comes
// from the embedded configuration and the weights from the stored tensors.
struct LoadedModel {
    RunConfig config;
    Model<float> model;
};

auto load_model(const std::string& checkpoint_path) -> LoadedModel;

struct LatencyStats {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
};

struct EvalPair {
    std::string id;  // audio file basename without extension
    double prediction = 0.0;
    double target = 0.0;
};

struct EvalReport {
    std::vector<EvalPair> pairs;  // manifest order
    double mse = 0.0;
    double lcc = 0.0;
    double srcc = 0.0;
    LatencyStats latency;  // per-utterance forward time
    std::string condition;
    int threads = 1;
    std::vector<std::string> failures;  // "path: reason", manifest order
    std::string scatter_csv;            // written file paths
    std::string report_path;
};

struct EvalOptions {
    std::string out_dir;                 // receives scatter.csv and report.txt
    std::optional<Split> split;          // nullopt = evaluate every row
    std::string condition;               // label echoed into the report; defaults to the split
    std::string checkpoint_label;        // provenance lines for the report header
    std::string manifest_label;
    int max_threads = 0;                 // 0 = hardware concurrency; the
                                         // DEEPGESI_THREADS env var caps this further
};

// Runs inference over the selected manifest rows and writes two artifacts:
//   scatter.csv  - `id,prediction,target`, one row per utterance
//   report.txt   - key-value summary (metrics, latency) plus the same CSV
// Unreadable or undecodable files are reported in `failures` and skipped;
// callers should treat a non-empty failure list as a data error. Utterances
// are processed by a small worker pool (capped by DEEPGESI_THREADS); outputs
// are ordered by manifest row regardless of thread interleaving.
auto evaluate_model(Model<float>& model, const RunConfig& cfg,
                    const std::vector<ManifestEntry>& entries, const EvalOptions& opts)
    -> EvalReport;

struct BenchResult {
    int n_timed = 0;
    bool forward_only = false;
    LatencyStats latency;               // per-utterance inference time
    double throughput_utt_per_s = 0.0;  // 1000 / mean latency in ms
    double audio_seconds = 0.0;         // total audio duration timed
    double realtime_factor = 0.0;       // audio seconds per wall-clock second
};

// Times end-to-end inference (STFT feature extraction + network forward; file
// I/O excluded) for one in-memory utterance, `repetitions` times after
// `warmup` untimed runs. Single-threaded. With forward_only the STFT features
// are computed once outside the timed region, isolating the network itself.
auto bench_utterance(Model<float>& model, const RunConfig& cfg,
                     const std::vector<float>& samples, int repetitions, int warmup,
                     bool forward_only) -> BenchResult;

struct BenchOptions {
    int n = 500;                 // utterances to sample from the manifest
    int warmup = 3;              // untimed runs before measurement
    bool forward_only = false;
    std::uint64_t seed = 1234;   // sampling seed
    std::optional<Split> split;  // nullopt = sample from every row
};

// Samples min(n, available) utterances without replacement and times each
// once. Warm-up runs on the first sampled utterance are excluded.
auto bench_model(Model<float>& model, const RunConfig& cfg,
                 const std::vector<ManifestEntry>& entries, const BenchOptions& opts)
    -> BenchResult;

}  // namespace deepgesi
