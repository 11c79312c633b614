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

#include "deepgesi/model.hpp"
#include "deepgesi/sinc.hpp"
#include "deepgesi/stft.hpp"

namespace deepgesi {

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 6;
    double alpha = 1.0;  // weight of the frame-level loss term
    int max_epochs = 100;
    int early_stop_patience = 10;
    std::uint64_t seed = 1234;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 0.0;     // 0 disables clipping
    long max_steps = 0;              // 0 = no step cap
    double target_train_loss = 0.0;  // 0 = no target; stop once train loss drops below

    void validate() const;
};

// Every tunable setting of a run, serializable as flat key=value text.
// The same text is echoed into output directories and embedded in
// checkpoints so inference reproduces training-time features exactly.
struct RunConfig {
    StftConfig stft;
    ModelConfig model;
    TrainConfig train;
    int lfb_filters = 64;
    int lfb_kernel = 129;
    int target_sr = 16000;
    bool rms_normalize = false;

    // Filterbank geometry implied by the STFT framing (shared win/hop keeps
    // the two feature streams aligned).
    [[nodiscard]] auto sinc_geometry() const -> SincGeometry;

    [[nodiscard]] auto to_ini() const -> std::string;

    // Applies one "key=value" assignment. Throws UsageError for unknown keys
    // or unparseable values.
    void apply(const std::string& key, const std::string& value);

    // Parses INI-style text: blank lines and '#' comments ignored, each
    // other line "key=value". Throws UsageError on malformed lines or
    // unknown keys.
    void apply_ini(const std::string& text, const std::string& origin);

    void validate() const;
};

// Reads a config file and applies it over `base`.
auto load_config_file(const std::string& path, RunConfig base = {}) -> RunConfig;

// Writes text to a file atomically (write-then-rename).
void write_text_file(const std::string& path, const std::string& text);

auto read_text_file(const std::string& path) -> std::string;

}  // namespace deepgesi
