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

#include "deepgesi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "deepgesi/checkpoint.hpp"
#include "deepgesi/metrics.hpp"
#include "deepgesi/rng.hpp"
#include "deepgesi/stft.hpp"

namespace deepgesi {
namespace {

constexpr std::uint64_t kShuffleStream = 0x747261696eULL;  // per-epoch batch order

auto utterance_id(const std::string& audio_path) -> std::string {
    return std::filesystem::path(audio_path).stem().string();
}

// Snapshot the full training state for serialization.
auto make_checkpoint(const Model<float>& model, const RunConfig& cfg,
                     const AdamState<float>& adam, std::uint32_t epochs_completed,
                     std::uint32_t bad_epochs, double best_val_loss, std::uint64_t global_step)
    -> Checkpoint {
    Checkpoint ckpt;
    ckpt.config = cfg;
    for (const auto& [name, var] : model.params().items()) {
        ckpt.tensors.emplace_back(name, var.value());
    }
    ckpt.has_adam = true;
    ckpt.adam_step = adam.step;
    ckpt.adam_m = adam.m;
    ckpt.adam_v = adam.v;
    ckpt.epochs_completed = epochs_completed;
    ckpt.bad_epochs = bad_epochs;
    ckpt.best_val_loss = best_val_loss;
    ckpt.global_step = global_step;
    return ckpt;
}

auto format_metric(double v) -> std::string {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return {buf};
}

}  // namespace

auto prepare_utterance(const std::string& audio_path, double target, Split split,
                       const RunConfig& cfg) -> PreparedUtterance {
    AudioBuffer buf = load_wav(audio_path);
    if (buf.sample_rate_hz != cfg.target_sr) { buf = resample(buf, cfg.target_sr); }
    if (cfg.rms_normalize) { buf = rms_normalize(buf); }
    PreparedUtterance utt;
    utt.id = utterance_id(audio_path);
    utt.stft = stft_features(buf, cfg.stft);
    utt.samples = std::move(buf.samples);
    utt.target = target;
    utt.split = split;
    return utt;
}

auto train_model(const RunConfig& cfg_in, const std::vector<ManifestEntry>& entries,
                 const TrainOptions& opts) -> TrainResult {
    if (opts.out_dir.empty()) { throw UsageError("train: an output directory is required"); }
    std::filesystem::create_directories(opts.out_dir);
    const std::string last_path =
        (std::filesystem::path(opts.out_dir) / "checkpoint_last.bin").string();
    const std::string best_path =
        (std::filesystem::path(opts.out_dir) / "checkpoint_best.bin").string();
    const std::string metrics_path =
        (std::filesystem::path(opts.out_dir) / "metrics.csv").string();

    // Resolve the effective configuration. On resume the model architecture,
    // feature geometry, and seed come from the checkpoint (they must match the
    // saved tensors and keep the batch-order stream aligned); the optimization
    // schedule (epochs, lr, patience, ...) may be adjusted by the caller, e.g.
    // to extend training.
    RunConfig cfg = cfg_in;
    bool resuming = false;
    Checkpoint resume_ckpt;
    if (!opts.resume_checkpoint.empty()) {
        resuming = true;
        resume_ckpt = load_checkpoint(opts.resume_checkpoint);
        const TrainConfig requested = cfg_in.train;
        cfg = resume_ckpt.config;
        cfg.train = requested;
        cfg.train.seed = resume_ckpt.config.train.seed;
    }
    cfg.validate();

    // Load and cache the dataset up front; training touches every utterance
    // every epoch, so I/O failures should surface before any optimization.
    std::vector<PreparedUtterance> train_set;
    std::vector<PreparedUtterance> val_set;
    for (const auto& entry : entries) {
        if (entry.split == Split::test || entry.split == Split::unseen) { continue; }
        PreparedUtterance utt = prepare_utterance(entry.audio_path, entry.target, entry.split, cfg);
        if (entry.split == Split::train) {
            train_set.push_back(std::move(utt));
        } else {
            val_set.push_back(std::move(utt));
        }
    }
    if (train_set.empty()) { throw DataError("train: the manifest has no train-split rows"); }

    Model<float> model(cfg.model, cfg.sinc_geometry(), cfg.stft, cfg.train.seed);
    AdamState<float> adam;
    adam.init(model.params());

    std::uint32_t start_epoch = 0;
    std::uint32_t bad_epochs = 0;
    double best_monitored = std::numeric_limits<double>::infinity();
    std::uint64_t global_step = 0;
    if (resuming) {
        apply_checkpoint(model, resume_ckpt);
        if (resume_ckpt.has_adam) {
            adam.step = resume_ckpt.adam_step;
            adam.m = resume_ckpt.adam_m;
            adam.v = resume_ckpt.adam_v;
        }
        start_epoch = resume_ckpt.epochs_completed;
        bad_epochs = resume_ckpt.bad_epochs;
        best_monitored = resume_ckpt.best_val_loss;
        global_step = resume_ckpt.global_step;
    }

    write_text_file((std::filesystem::path(opts.out_dir) / "config.ini").string(), cfg.to_ini());

    std::ofstream metrics;
    if (!resuming || !std::filesystem::exists(metrics_path)) {
        metrics.open(metrics_path, std::ios::trunc);
        metrics << "epoch,train_loss,val_loss,val_lcc\n";
    } else {
        metrics.open(metrics_path, std::ios::app);
    }
    if (!metrics) { throw DataError("cannot open '" + metrics_path + "' for writing"); }

    TrainResult result;
    result.best_checkpoint = best_path;
    result.last_checkpoint = last_path;
    result.metrics_csv = metrics_path;
    result.steps = static_cast<long>(global_step);
    result.best_val_loss = best_monitored;

    // Rethrow numeric failures with a pointer at the most recent usable state.
    auto diverged = [&](const std::string& what) -> NumericError {
        std::string msg = what;
        if (std::filesystem::exists(last_path)) {
            msg += "; last good checkpoint retained at '" + last_path + "'";
        }
        return NumericError(msg);
    };

    const auto& tc = cfg.train;
    bool stop = false;
    for (std::uint32_t epoch = start_epoch;
         epoch < static_cast<std::uint32_t>(tc.max_epochs) && !stop; ++epoch) {
        const std::uint32_t epoch_num = epoch + 1;  // 1-based for seeds and logs

        // Batch order is a pure function of (seed, epoch): resuming at an
        // epoch boundary reproduces the uninterrupted run exactly.
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(splitmix64(splitmix64(tc.seed, kShuffleStream), epoch_num));
        shuffle_rng.shuffle(order);

        double train_loss_sum = 0.0;
        std::size_t n_seen = 0;
        bool step_cap_hit = false;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t stop_idx =
                std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            const auto batch_n = static_cast<double>(stop_idx - start);

            model.params().zero_grads();
            double batch_loss = 0.0;
            for (std::size_t b = start; b < stop_idx; ++b) {
                auto& utt = train_set[order[b]];
                ForwardResult<float> out = model.forward(utt.samples, utt.stft);
                ad::Var<float> loss = utterance_loss(out, utt.target, tc.alpha);
                const double li = static_cast<double>(loss.item());
                if (!std::isfinite(li)) {
                    throw diverged("training diverged: non-finite loss on utterance '" +
                                   utt.id + "'");
                }
                batch_loss += li;
                // Seeding backward with 1/B accumulates the batch-mean
                // gradient one utterance at a time, so only one graph is
                // alive at any point.
                loss.backward(static_cast<float>(1.0 / batch_n));
            }
            try {
                adam_step(model.params(), adam, tc);
            } catch (const NumericError& e) {
                throw diverged(e.what());
            }
            global_step += 1;
            train_loss_sum += batch_loss;
            n_seen += stop_idx - start;
            if (tc.max_steps > 0 && global_step >= static_cast<std::uint64_t>(tc.max_steps)) {
                step_cap_hit = true;
                break;
            }
        }

        const double train_loss = train_loss_sum / static_cast<double>(n_seen);

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        double val_lcc = std::numeric_limits<double>::quiet_NaN();
        if (!val_set.empty()) {
            double val_sum = 0.0;
            std::vector<double> preds;
            std::vector<double> targets;
            preds.reserve(val_set.size());
            targets.reserve(val_set.size());
            for (auto& utt : val_set) {
                ForwardResult<float> out = model.forward(utt.samples, utt.stft);
                val_sum += static_cast<double>(utterance_loss(out, utt.target, tc.alpha).item());
                preds.push_back(static_cast<double>(out.utterance_score.item()));
                targets.push_back(utt.target);
            }
            val_loss = val_sum / static_cast<double>(val_set.size());
            if (!std::isfinite(val_loss)) {
                throw diverged("training diverged: non-finite validation loss");
            }
            if (preds.size() >= 2) {
                try {
                    val_lcc = lcc(preds, targets);
                } catch (const NumericError&) {
                    // Constant predictions early in training: report NaN, keep going.
                }
            }
        }

        const double monitored = val_set.empty() ? train_loss : val_loss;
        const bool improved = monitored < best_monitored;
        if (improved) {
            best_monitored = monitored;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
        }

        metrics << epoch_num << ',' << format_metric(train_loss) << ','
                << format_metric(val_loss) << ',' << format_metric(val_lcc) << '\n';
        metrics.flush();

        if (step_cap_hit) { stop = true; }
        if (tc.target_train_loss > 0.0 && train_loss < tc.target_train_loss) { stop = true; }
        if (bad_epochs > static_cast<std::uint32_t>(tc.early_stop_patience)) { stop = true; }

        // The step-cap stop can land mid-epoch; `epochs_completed` counts only
        // full passes, so a later resume replays from a clean boundary.
        const std::uint32_t epochs_completed = step_cap_hit ? epoch : epoch_num;
        Checkpoint ckpt = make_checkpoint(model, cfg, adam, epochs_completed, bad_epochs,
                                          best_monitored, global_step);
        save_checkpoint(last_path, ckpt);
        if (improved) { save_checkpoint(best_path, ckpt); }

        if (!opts.quiet) {
            std::cout << "epoch " << epoch_num << "/" << tc.max_epochs << "  train_loss "
                      << format_metric(train_loss) << "  val_loss " << format_metric(val_loss)
                      << "  val_lcc " << format_metric(val_lcc) << "  step " << global_step
                      << '\n';
        }

        result.epochs_run = static_cast<int>(epoch_num);
        result.steps = static_cast<long>(global_step);
        result.final_train_loss = train_loss;
        result.best_val_loss = best_monitored;
    }

    if (!std::filesystem::exists(best_path) && std::filesystem::exists(last_path)) {
        // No epoch improved on the resumed best: keep a usable best checkpoint.
        std::filesystem::copy_file(last_path, best_path,
                                   std::filesystem::copy_options::overwrite_existing);
    }
    return result;
}

}  // namespace deepgesi
