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

#include "deepgesi/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "deepgesi/errors.hpp"
#include "deepgesi/metrics.hpp"
#include "deepgesi/rng.hpp"
#include "deepgesi/stft.hpp"

namespace deepgesi {
namespace {

auto percentile(std::vector<double> sorted, double p) -> double {
    if (sorted.empty()) { return 0.0; }
    // Nearest-rank percentile over the ascending sample.
    const auto n = static_cast<double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    idx = std::min(std::max<std::size_t>(idx, 1), sorted.size()) - 1;
    return sorted[idx];
}

auto latency_stats(std::vector<double> times_ms) -> LatencyStats {
    LatencyStats stats;
    if (times_ms.empty()) { return stats; }
    double sum = 0.0;
    for (double t : times_ms) { sum += t; }
    stats.mean_ms = sum / static_cast<double>(times_ms.size());
    std::sort(times_ms.begin(), times_ms.end());
    stats.p50_ms = percentile(times_ms, 50.0);
    stats.p95_ms = percentile(times_ms, 95.0);
    return stats;
}

// Worker count: requested (or hardware) threads, capped by DEEPGESI_THREADS
// and by the number of work items.
auto resolve_threads(int requested, std::size_t n_items) -> int {
    int threads = requested > 0 ? requested
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) { threads = 1; }
    if (const char* env = std::getenv("DEEPGESI_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || cap <= 0) {
            throw UsageError("DEEPGESI_THREADS must be a positive integer, got '" +
                             std::string(env) + "'");
        }
        threads = std::min(threads, static_cast<int>(cap));
    }
    if (n_items > 0) {
        threads = std::min(threads, static_cast<int>(n_items));
    }
    return std::max(threads, 1);
}

auto format_num(double v) -> std::string {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return {buf};
}

auto scatter_rows(const std::vector<EvalPair>& pairs) -> std::string {
    std::ostringstream out;
    out << "id,prediction,target\n";
    out.precision(8);
    for (const auto& pair : pairs) {
        out << pair.id << ',' << format_num(pair.prediction) << ',' << format_num(pair.target)
            << '\n';
    }
    return out.str();
}

}  // namespace

auto load_model(const std::string& checkpoint_path) -> LoadedModel {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const RunConfig& cfg = ckpt.config;
    Model<float> model(cfg.model, cfg.sinc_geometry(), cfg.stft, cfg.train.seed);
    apply_checkpoint(model, ckpt);
    return {cfg, std::move(model)};
}

auto evaluate_model(Model<float>& model, const RunConfig& cfg,
                    const std::vector<ManifestEntry>& entries, const EvalOptions& opts)
    -> EvalReport {
    std::vector<const ManifestEntry*> selected;
    for (const auto& entry : entries) {
        if (!opts.split || entry.split == *opts.split) { selected.push_back(&entry); }
    }
    if (selected.empty()) {
        throw DataError("evaluate: no manifest rows match the requested split" +
                        (opts.split ? " '" + to_string(*opts.split) + "'" : std::string()));
    }

    struct Slot {
        bool ok = false;
        EvalPair pair;
        double forward_ms = 0.0;
        std::string failure;
    };
    std::vector<Slot> slots(selected.size());

    const int threads = resolve_threads(opts.max_threads, selected.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= selected.size()) { break; }
            const ManifestEntry& entry = *selected[i];
            Slot& slot = slots[i];
            try {
                PreparedUtterance utt =
                    prepare_utterance(entry.audio_path, entry.target, entry.split, cfg);
                const auto start = std::chrono::steady_clock::now();
                ForwardResult<float> out = model.forward(utt.samples, utt.stft);
                const auto stop = std::chrono::steady_clock::now();
                const double score = static_cast<double>(out.utterance_score.item());
                if (!std::isfinite(score)) {
                    throw NumericError("non-finite prediction");
                }
                slot.pair = {utt.id, score, entry.target};
                slot.forward_ms =
                    std::chrono::duration<double, std::milli>(stop - start).count();
                slot.ok = true;
            } catch (const std::exception& e) {
                slot.failure = entry.audio_path + ": " + e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) { pool.emplace_back(worker); }
        for (auto& t : pool) { t.join(); }
    }

    EvalReport report;
    report.threads = threads;
    report.condition = !opts.condition.empty() ? opts.condition
                       : opts.split            ? to_string(*opts.split)
                                               : std::string("all");
    std::vector<double> preds;
    std::vector<double> targets;
    std::vector<double> times_ms;
    for (const auto& slot : slots) {
        if (slot.ok) {
            report.pairs.push_back(slot.pair);
            preds.push_back(slot.pair.prediction);
            targets.push_back(slot.pair.target);
            times_ms.push_back(slot.forward_ms);
        } else {
            report.failures.push_back(slot.failure);
        }
    }
    if (report.pairs.empty()) {
        std::string msg = "evaluate: every utterance failed";
        if (!report.failures.empty()) { msg += "; first: " + report.failures.front(); }
        throw DataError(msg);
    }
    report.latency = latency_stats(times_ms);

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        report.scatter_csv = (std::filesystem::path(opts.out_dir) / "scatter.csv").string();
        write_text_file(report.scatter_csv, scatter_rows(report.pairs));
    }

    // Metric computation comes after the scatter file is on disk so a
    // degenerate metric (e.g. constant predictions) still leaves the raw
    // predictions available for inspection.
    report.mse = mse(preds, targets);
    report.lcc = lcc(preds, targets);
    report.srcc = srcc(preds, targets);

    if (!opts.out_dir.empty()) {
        std::ostringstream doc;
        doc << "deepgesi evaluation report\n";
        doc << "condition: " << report.condition << '\n';
        if (!opts.checkpoint_label.empty()) { doc << "checkpoint: " << opts.checkpoint_label << '\n'; }
        if (!opts.manifest_label.empty()) { doc << "manifest: " << opts.manifest_label << '\n'; }
        doc << "n_evaluated: " << report.pairs.size() << '\n';
        doc << "n_failed: " << report.failures.size() << '\n';
        doc << "mse: " << format_num(report.mse) << '\n';
        doc << "lcc: " << format_num(report.lcc) << '\n';
        doc << "srcc: " << format_num(report.srcc) << '\n';
        doc << "latency_mean_ms: " << format_num(report.latency.mean_ms) << '\n';
        doc << "latency_p50_ms: " << format_num(report.latency.p50_ms) << '\n';
        doc << "latency_p95_ms: " << format_num(report.latency.p95_ms) << '\n';
        doc << "threads: " << report.threads << '\n';
        doc << '\n' << scatter_rows(report.pairs);
        if (!report.failures.empty()) {
            doc << '\n';
            for (const auto& f : report.failures) { doc << "failed: " << f << '\n'; }
        }
        report.report_path = (std::filesystem::path(opts.out_dir) / "report.txt").string();
        write_text_file(report.report_path, doc.str());
    }
    return report;
}

namespace {

// One timed end-to-end (or forward-only) inference over an in-memory
// waveform. `cached_stft` must be the utterance's features when forward_only.
auto timed_inference(Model<float>& model, const RunConfig& cfg,
                     const std::vector<float>& samples, bool forward_only,
                     const MatF* cached_stft) -> double {
    const auto start = std::chrono::steady_clock::now();
    if (forward_only) {
        (void)model.forward(samples, *cached_stft);
    } else {
        AudioBuffer buf;
        buf.samples = samples;
        buf.sample_rate_hz = cfg.target_sr;
        const MatF stft = stft_features(buf, cfg.stft);
        (void)model.forward(samples, stft);
    }
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

void finish_bench(BenchResult& result, std::vector<double> times_ms, double audio_seconds) {
    double wall_ms = 0.0;
    for (double t : times_ms) { wall_ms += t; }
    result.n_timed = static_cast<int>(times_ms.size());
    result.latency = latency_stats(std::move(times_ms));
    result.throughput_utt_per_s =
        result.latency.mean_ms > 0.0 ? 1000.0 / result.latency.mean_ms : 0.0;
    result.audio_seconds = audio_seconds;
    result.realtime_factor = wall_ms > 0.0 ? audio_seconds / (wall_ms / 1000.0) : 0.0;
}

}  // namespace

auto bench_utterance(Model<float>& model, const RunConfig& cfg,
                     const std::vector<float>& samples, int repetitions, int warmup,
                     bool forward_only) -> BenchResult {
    if (repetitions < 1) { throw UsageError("bench: repetitions must be >= 1"); }
    if (warmup < 0) { throw UsageError("bench: warmup must be >= 0"); }
    AudioBuffer buf;
    buf.samples = samples;
    buf.sample_rate_hz = cfg.target_sr;
    const MatF stft = stft_features(buf, cfg.stft);
    for (int i = 0; i < warmup; ++i) { (void)model.forward(samples, stft); }

    std::vector<double> times_ms;
    times_ms.reserve(static_cast<std::size_t>(repetitions));
    for (int i = 0; i < repetitions; ++i) {
        times_ms.push_back(timed_inference(model, cfg, samples, forward_only, &stft));
    }
    BenchResult result;
    result.forward_only = forward_only;
    const double utt_seconds =
        static_cast<double>(samples.size()) / static_cast<double>(cfg.target_sr);
    finish_bench(result, std::move(times_ms), utt_seconds * repetitions);
    return result;
}

auto bench_model(Model<float>& model, const RunConfig& cfg,
                 const std::vector<ManifestEntry>& entries, const BenchOptions& opts)
    -> BenchResult {
    if (opts.n < 1) { throw UsageError("bench: the number of utterances must be >= 1"); }
    if (opts.warmup < 0) { throw UsageError("bench: warmup must be >= 0"); }
    std::vector<const ManifestEntry*> selected;
    for (const auto& entry : entries) {
        if (!opts.split || entry.split == *opts.split) { selected.push_back(&entry); }
    }
    if (selected.empty()) {
        throw DataError("bench: no manifest rows match the requested split" +
                        (opts.split ? " '" + to_string(*opts.split) + "'" : std::string()));
    }
    if (selected.size() > static_cast<std::size_t>(opts.n)) {
        Rng rng(splitmix64(opts.seed, 0x62656e6368ULL));  // sampling stream
        rng.shuffle(selected);
        selected.resize(static_cast<std::size_t>(opts.n));
    }

    std::vector<PreparedUtterance> utts;
    utts.reserve(selected.size());
    for (const auto* entry : selected) {
        utts.push_back(prepare_utterance(entry->audio_path, entry->target, entry->split, cfg));
    }

    for (int i = 0; i < opts.warmup; ++i) {
        (void)model.forward(utts.front().samples, utts.front().stft);
    }

    std::vector<double> times_ms;
    times_ms.reserve(utts.size());
    double audio_seconds = 0.0;
    for (const auto& utt : utts) {
        times_ms.push_back(
            timed_inference(model, cfg, utt.samples, opts.forward_only, &utt.stft));
        audio_seconds +=
            static_cast<double>(utt.samples.size()) / static_cast<double>(cfg.target_sr);
    }
    BenchResult result;
    result.forward_only = opts.forward_only;
    finish_bench(result, std::move(times_ms), audio_seconds);
    return result;
}

}  // namespace deepgesi
