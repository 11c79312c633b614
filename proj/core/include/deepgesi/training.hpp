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
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "deepgesi/autodiff.hpp"
#include "deepgesi/config.hpp"
#include "deepgesi/errors.hpp"
#include "deepgesi/labels.hpp"
#include "deepgesi/model.hpp"

namespace deepgesi {

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Dual-level regression loss for one utterance:
//   L_i = (y_i - yhat_i)^2 + alpha * mean_t (y_i - f_{i,t})^2
// where yhat is the pooled utterance score and f_t the per-frame scores.
// The batch loss is the mean of L_i over the batch.
template <typename T>
auto utterance_loss(const ForwardResult<T>& out, double target, double alpha) -> ad::Var<T> {
    const T y = static_cast<T>(target);
    ad::Var<T> sent = ad::square(ad::add_scalar(out.utterance_score, -y));
    ad::Var<T> frame = ad::mean_all(ad::square(ad::add_scalar(out.frame_scores, -y)));
    return ad::add(sent, ad::mul_scalar(frame, static_cast<T>(alpha)));
}

template <typename T>
auto dual_loss(const std::vector<ForwardResult<T>>& outputs, const std::vector<double>& targets,
               double alpha) -> ad::Var<T> {
    if (outputs.empty() || outputs.size() != targets.size()) {
        throw DataError("dual loss requires a non-empty batch with matching targets");
    }
    ad::Var<T> total;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        ad::Var<T> li = utterance_loss(outputs[i], targets[i], alpha);
        total = i == 0 ? li : ad::add(total, li);
    }
    return ad::mul_scalar(total, static_cast<T>(1.0 / static_cast<double>(outputs.size())));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
    std::uint64_t step = 0;
    std::vector<Mat<T>> m;  // first moments, parameter registry order
    std::vector<Mat<T>> v;  // second moments

    void init(const ParamStore<T>& params) {
        step = 0;
        m.clear();
        v.clear();
        for (const auto& [name, var] : params.items()) {
            m.push_back(Mat<T>::Zero(var.value().rows(), var.value().cols()));
            v.push_back(Mat<T>::Zero(var.value().rows(), var.value().cols()));
        }
    }
};

template <typename T>
auto global_grad_norm(const ParamStore<T>& params) -> double {
    double sum_sq = 0.0;
    for (const auto& [name, var] : params.items()) {
        sum_sq += static_cast<double>(
            var.grad().template cast<double>().array().square().sum());
    }
    return std::sqrt(sum_sq);
}

// One Adam update over every registered parameter, using the gradients
// currently accumulated in the store. Throws NumericError (naming the
// parameter) if a gradient is non-finite.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const TrainConfig& cfg) {
    auto& items = params.items();
    if (state.m.size() != items.size() || state.v.size() != items.size()) {
        throw DataError("optimizer state does not match the parameter list");
    }
    for (auto& [name, var] : items) {
        if (!var.grad().allFinite()) {
            throw NumericError("non-finite gradient for parameter '" + name + "'");
        }
    }

    T scale = static_cast<T>(1);
    if (cfg.grad_clip_norm > 0.0) {
        const double norm = global_grad_norm(params);
        if (norm > cfg.grad_clip_norm) { scale = static_cast<T>(cfg.grad_clip_norm / norm); }
    }

    state.step += 1;
    const auto t = static_cast<double>(state.step);
    const T beta1 = static_cast<T>(cfg.adam_beta1);
    const T beta2 = static_cast<T>(cfg.adam_beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(cfg.adam_beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(cfg.adam_beta2, t));
    const T lr = static_cast<T>(cfg.lr);
    const T eps = static_cast<T>(cfg.adam_eps);

    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& var = items[i].second;
        const Mat<T> g = var.grad() * scale;
        state.m[i] = beta1 * state.m[i] + (static_cast<T>(1) - beta1) * g;
        state.v[i].array() =
            beta2 * state.v[i].array() + (static_cast<T>(1) - beta2) * g.array().square();
        var.value().array() -=
            lr * (state.m[i].array() / bc1) /
            ((state.v[i].array() / bc2).sqrt() + eps);
    }
}

// ---------------------------------------------------------------------------
// Dataset preparation
// ---------------------------------------------------------------------------

// One utterance loaded, resampled to the configured rate, and with its STFT
// features precomputed (the STFT branch has no learnable parameters).
struct PreparedUtterance {
    std::string id;  // file basename without extension
    std::vector<float> samples;
    MatF stft;
    double target = 0.0;
    Split split = Split::train;
};

auto prepare_utterance(const std::string& audio_path, double target, Split split,
                       const RunConfig& cfg) -> PreparedUtterance;

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string out_dir;
    std::string resume_checkpoint;  // empty = start fresh
    bool quiet = false;
};

struct TrainResult {
    int epochs_run = 0;  // total completed epochs, including before a resume
    long steps = 0;      // total optimizer steps
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double best_val_loss = std::numeric_limits<double>::quiet_NaN();
    std::string best_checkpoint;
    std::string last_checkpoint;
    std::string metrics_csv;
};

// Trains a model on the train split of `entries`, monitoring the val split.
// Writes into opts.out_dir:
//   config.ini         - the effective run configuration
//   metrics.csv        - per-epoch `epoch,train_loss,val_loss,val_lcc`
//   checkpoint_last.bin  - state after the most recent epoch
//   checkpoint_best.bin  - state with the lowest monitored loss
// Training is deterministic per seed, and resuming from checkpoint_last.bin
// reproduces the uninterrupted trajectory: batch order is derived statelessly
// from (seed, epoch), and optimizer state is restored exactly.
auto train_model(const RunConfig& cfg, const std::vector<ManifestEntry>& entries,
                 const TrainOptions& opts) -> TrainResult;

}  // namespace deepgesi
