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

#include "deepgesi/model.hpp"

#include "deepgesi/errors.hpp"

namespace deepgesi {

auto activation_from_string(const std::string& name) -> Activation {
    if (name == "maxout") { return Activation::maxout; }
    if (name == "relu") { return Activation::relu; }
    if (name == "leaky_relu") { return Activation::leaky_relu; }
    if (name == "prelu") { return Activation::prelu; }
    throw UsageError("unknown activation: " + name +
                     " (expected maxout, relu, leaky_relu, or prelu)");
}

auto to_string(Activation a) -> std::string {
    switch (a) {
        case Activation::maxout: return "maxout";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::prelu: return "prelu";
    }
    return "unknown";
}

auto positional_encoding_from_string(const std::string& name) -> PositionalEncoding {
    if (name == "rope") { return PositionalEncoding::rope; }
    if (name == "sinusoidal") { return PositionalEncoding::sinusoidal; }
    if (name == "learned") { return PositionalEncoding::learned; }
    if (name == "none") { return PositionalEncoding::none; }
    throw UsageError("unknown positional encoding: " + name +
                     " (expected rope, sinusoidal, learned, or none)");
}

auto to_string(PositionalEncoding pe) -> std::string {
    switch (pe) {
        case PositionalEncoding::rope: return "rope";
        case PositionalEncoding::sinusoidal: return "sinusoidal";
        case PositionalEncoding::learned: return "learned";
        case PositionalEncoding::none: return "none";
    }
    return "unknown";
}

void ModelConfig::validate() const {
    if (d_model <= 0 || d_model % 2 != 0) {
        throw UsageError("model: d_model must be positive and even (rotary encoding works on " +
                         std::string("2-D blocks); got ") + std::to_string(d_model));
    }
    if (n_heads <= 0 || d_model % n_heads != 0) {
        throw UsageError("model: n_heads must divide d_model (got " + std::to_string(n_heads) +
                         " heads for d_model " + std::to_string(d_model) + ")");
    }
    if (n_blocks <= 0) { throw UsageError("model: n_blocks must be positive"); }
    if (maxout_pieces <= 0) { throw UsageError("model: maxout_pieces must be positive"); }
    if (conv_kernel <= 0 || conv_stride <= 0 || conv_channels <= 0) {
        throw UsageError("model: fusion conv shape fields must be positive");
    }
    if (conv_channels != d_model) {
        throw UsageError("model: conv_channels must equal d_model (the fused representation "
                         "feeds the attention blocks directly); got conv_channels " +
                         std::to_string(conv_channels) + ", d_model " + std::to_string(d_model));
    }
    if (positional_encoding == PositionalEncoding::learned && max_learned_len <= 0) {
        throw UsageError("model: max_learned_len must be positive for learned encoding");
    }
}

}  // namespace deepgesi
