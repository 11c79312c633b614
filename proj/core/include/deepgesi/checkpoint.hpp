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
#include <utility>
#include <vector>

#include "deepgesi/config.hpp"
#include "deepgesi/mat.hpp"
#include "deepgesi/model.hpp"

namespace deepgesi {

// Serializable training state. The binary layout is versioned, explicitly
// little-endian, and fully deterministic: the tensor list preserves the
// model's parameter registration order, so save -> load -> save reproduces
// the file byte for byte.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    RunConfig config;
    std::vector<std::pair<std::string, MatF>> tensors;  // parameters, registry order

    bool has_adam = false;
    std::uint64_t adam_step = 0;
    std::vector<MatF> adam_m;  // same order as tensors
    std::vector<MatF> adam_v;

    std::uint32_t epochs_completed = 0;
    std::uint32_t bad_epochs = 0;  // consecutive epochs without val improvement
    double best_val_loss = 0.0;
    std::uint64_t global_step = 0;
    std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

auto load_checkpoint(const std::string& path) -> Checkpoint;

// Copies checkpoint tensors into a model built from the same configuration.
// Throws DataError on any name, order, or shape mismatch.
void apply_checkpoint(Model<float>& model, const Checkpoint& ckpt);

}  // namespace deepgesi
