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
#include <string>
#include <utility>
#include <vector>

#include "deepgesi/autodiff.hpp"
#include "deepgesi/features.hpp"
#include "deepgesi/rng.hpp"
#include "deepgesi/rope.hpp"
#include "deepgesi/stft.hpp"

namespace deepgesi {

enum class Activation { maxout, relu, leaky_relu, prelu };
enum class PositionalEncoding { rope, sinusoidal, learned, none };

auto activation_from_string(const std::string& name) -> Activation;
auto to_string(Activation a) -> std::string;
auto positional_encoding_from_string(const std::string& name) -> PositionalEncoding;
auto to_string(PositionalEncoding pe) -> std::string;

struct ModelConfig {
    int d_model = 128;
    int n_heads = 4;
    int n_blocks = 2;
    int maxout_pieces = 2;
    int conv_channels = 128;
    int conv_kernel = 3;
    int conv_stride = 1;
    Activation activation = Activation::maxout;
    PositionalEncoding positional_encoding = PositionalEncoding::rope;
    int max_learned_len = 2000;  // frame cap for learned positional tables

    void validate() const;
};

constexpr float kLeakyReluSlope = 0.01F;
constexpr float kPreluInit = 0.25F;
constexpr float kInitStd = 0.02F;

// Ordered, named parameter registry. Registration order is fixed by the
// model constructor and defines the checkpoint serialization order.
template <typename T>
class ParamStore {
  public:
    auto add(const std::string& name, Mat<T> value) -> ad::Var<T> {
        auto var = ad::Var<T>::leaf(std::move(value), /*requires_grad=*/true);
        items_.emplace_back(name, var);
        return var;
    }

    [[nodiscard]] auto find(const std::string& name) -> ad::Var<T>* {
        for (auto& [item_name, var] : items_) {
            if (item_name == name) { return &var; }
        }
        return nullptr;
    }

    [[nodiscard]] auto items() -> std::vector<std::pair<std::string, ad::Var<T>>>& {
        return items_;
    }
    [[nodiscard]] auto items() const
        -> const std::vector<std::pair<std::string, ad::Var<T>>>& {
        return items_;
    }

    void zero_grads() {
        for (auto& [name, var] : items_) { var.zero_grad(); }
    }

    [[nodiscard]] auto total_size() const -> std::size_t {
        std::size_t n = 0;
        for (const auto& [name, var] : items_) {
            n += static_cast<std::size_t>(var.value().size());
        }
        return n;
    }

  private:
    std::vector<std::pair<std::string, ad::Var<T>>> items_;
};

template <typename T>
struct ForwardResult {
    ad::Var<T> frame_scores;     // [T' x 1], each in (0, 1)
    ad::Var<T> utterance_score;  // [1 x 1], mean of frame scores
};

// The predictor network: fused STFT + LFB features -> 1-D conv -> activation
// -> attention blocks -> per-frame sigmoid head -> global average pooling.
template <typename T>
class Model {
  public:
    Model(ModelConfig cfg, SincGeometry geom, StftConfig stft_cfg, std::uint64_t seed)
        : cfg_(cfg), geom_(geom), stft_cfg_(stft_cfg) {
        cfg_.validate();
        geom_.validate();
        stft_cfg_.validate();
        Rng rng(splitmix64(seed, 0x6d6f64656cULL));  // independent init stream

        auto normal_mat = [&rng](Eigen::Index r, Eigen::Index c) {
            Mat<T> m(r, c);
            for (Eigen::Index i = 0; i < r; ++i) {
                for (Eigen::Index j = 0; j < c; ++j) {
                    m(i, j) = static_cast<T>(rng.normal(0.0, kInitStd));
                }
            }
            return m;
        };

        auto [low_init, band_init] = mel_init_cutoffs(geom_);
        Mat<T> low(1, geom_.num_filters);
        Mat<T> band(1, geom_.num_filters);
        for (int i = 0; i < geom_.num_filters; ++i) {
            low(0, i) = static_cast<T>(low_init[static_cast<std::size_t>(i)]);
            band(0, i) = static_cast<T>(band_init[static_cast<std::size_t>(i)]);
        }
        low_hz_ = params_.add("sinc.low_hz", std::move(low));
        band_hz_ = params_.add("sinc.band_hz", std::move(band));

        const int feat_dim = stft_cfg_.fft_size / 2 + 1 + geom_.num_filters;
        const int conv_out = cfg_.activation == Activation::maxout
                                 ? cfg_.conv_channels * cfg_.maxout_pieces
                                 : cfg_.conv_channels;
        fusion_weight_ =
            params_.add("fusion.weight", normal_mat(cfg_.conv_kernel * feat_dim, conv_out));
        fusion_bias_ = params_.add("fusion.bias", Mat<T>::Zero(1, conv_out));
        if (cfg_.activation == Activation::prelu) {
            fusion_prelu_ = params_.add("fusion.prelu_slope",
                                        Mat<T>::Constant(1, 1, static_cast<T>(kPreluInit)));
        }

        const int d = cfg_.d_model;
        const int ff_out =
            cfg_.activation == Activation::maxout ? d * cfg_.maxout_pieces : d;
        blocks_.resize(static_cast<std::size_t>(cfg_.n_blocks));
        for (int b = 0; b < cfg_.n_blocks; ++b) {
            auto& blk = blocks_[static_cast<std::size_t>(b)];
            const std::string prefix = "block" + std::to_string(b) + ".";
            blk.wq = params_.add(prefix + "wq", normal_mat(d, d));
            blk.wk = params_.add(prefix + "wk", normal_mat(d, d));
            blk.wv = params_.add(prefix + "wv", normal_mat(d, d));
            blk.wo = params_.add(prefix + "wo", normal_mat(d, d));
            blk.ff_weight = params_.add(prefix + "ff.weight", normal_mat(d, ff_out));
            blk.ff_bias = params_.add(prefix + "ff.bias", Mat<T>::Zero(1, ff_out));
            if (cfg_.activation == Activation::prelu) {
                blk.ff_prelu = params_.add(prefix + "ff.prelu_slope",
                                           Mat<T>::Constant(1, 1, static_cast<T>(kPreluInit)));
            }
        }

        if (cfg_.positional_encoding == PositionalEncoding::learned) {
            learned_pe_ = params_.add("pe.learned", normal_mat(cfg_.max_learned_len, d));
        }

        head_weight_ = params_.add("head.weight", normal_mat(d, 1));
        head_bias_ = params_.add("head.bias", Mat<T>::Zero(1, 1));
    }

    [[nodiscard]] auto config() const -> const ModelConfig& { return cfg_; }
    [[nodiscard]] auto sinc_geometry() const -> const SincGeometry& { return geom_; }
    [[nodiscard]] auto stft_config() const -> const StftConfig& { return stft_cfg_; }
    [[nodiscard]] auto params() -> ParamStore<T>& { return params_; }
    [[nodiscard]] auto params() const -> const ParamStore<T>& { return params_; }

    // Runs the network on one utterance. `samples` is the 16 kHz waveform
    // and `stft_feats` its precomputed [T x F] log-magnitude features (the
    // STFT branch has no learnable parameters, so features can be cached
    // across epochs; the LFB branch is recomputed through the current
    // filterbank parameters on every call).
    auto forward(const std::vector<T>& samples, const Mat<T>& stft_feats) -> ForwardResult<T> {
        ad::Var<T> lfb = lfb_features_var(samples, low_hz_, band_hz_, geom_);
        const Eigen::Index frames = std::min(stft_feats.rows(), lfb.rows());
        if (frames < cfg_.conv_kernel) {
            throw DataError("utterance too short for the fusion conv receptive field (" +
                            std::to_string(frames) + " frames < kernel " +
                            std::to_string(cfg_.conv_kernel) + ")");
        }
        if (lfb.rows() != frames) { lfb = ad::slice_rows(lfb, 0, frames); }
        ad::Var<T> stft_leaf = ad::Var<T>::leaf(stft_feats.topRows(frames));
        ad::Var<T> x = ad::concat_cols(stft_leaf, lfb);

        // Fusion conv over time (valid padding) + activation.
        x = ad::conv1d(x, fusion_weight_, fusion_bias_, cfg_.conv_kernel, cfg_.conv_stride,
                       /*pad=*/0);
        x = activate(x, fusion_prelu_);

        const Eigen::Index t_out = x.rows();
        if (cfg_.positional_encoding == PositionalEncoding::sinusoidal) {
            x = ad::add(x, ad::Var<T>::leaf(sinusoidal_table(t_out, cfg_.d_model)));
        } else if (cfg_.positional_encoding == PositionalEncoding::learned) {
            if (t_out > learned_pe_.rows()) {
                throw DataError("utterance of unexpected length: " + std::to_string(t_out) +
                                " frames exceeds the learned positional table (" +
                                std::to_string(learned_pe_.rows()) + ")");
            }
            x = ad::add(x, ad::slice_rows(learned_pe_, 0, t_out));
        }

        RopeTable<T> rope_table;
        if (cfg_.positional_encoding == PositionalEncoding::rope) {
            rope_table = RopeTable<T>::build(t_out, cfg_.d_model);
        }

        for (auto& blk : blocks_) { x = attention_block(x, blk, rope_table); }

        ad::Var<T> logits = ad::add_row_broadcast(ad::matmul(x, head_weight_), head_bias_);
        ForwardResult<T> result;
        result.frame_scores = ad::sigmoid(logits);
        result.utterance_score = ad::mean_all(result.frame_scores);
        return result;
    }

  private:
    struct Block {
        ad::Var<T> wq, wk, wv, wo;
        ad::Var<T> ff_weight, ff_bias;
        ad::Var<T> ff_prelu;
    };

    auto activate(ad::Var<T> x, const ad::Var<T>& prelu_slope) -> ad::Var<T> {
        switch (cfg_.activation) {
            case Activation::maxout: return ad::maxout(x, cfg_.maxout_pieces);
            case Activation::relu: return ad::relu(x);
            case Activation::leaky_relu:
                return ad::leaky_relu(x, static_cast<T>(kLeakyReluSlope));
            case Activation::prelu: return ad::prelu(x, prelu_slope);
        }
        throw UsageError("unknown activation");
    }

    auto attention_block(ad::Var<T> x, Block& blk, const RopeTable<T>& rope_table)
        -> ad::Var<T> {
        const Eigen::Index d = cfg_.d_model;
        const Eigen::Index head_dim = d / cfg_.n_heads;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

        ad::Var<T> z = ad::layer_norm_rows(x);
        ad::Var<T> q = ad::matmul(z, blk.wq);
        ad::Var<T> k = ad::matmul(z, blk.wk);
        ad::Var<T> v = ad::matmul(z, blk.wv);
        if (cfg_.positional_encoding == PositionalEncoding::rope) {
            q = apply_rope(q, rope_table);
            k = apply_rope(k, rope_table);
        }

        ad::Var<T> context;
        for (int h = 0; h < cfg_.n_heads; ++h) {
            ad::Var<T> qh = ad::slice_cols(q, h * head_dim, head_dim);
            ad::Var<T> kh = ad::slice_cols(k, h * head_dim, head_dim);
            ad::Var<T> vh = ad::slice_cols(v, h * head_dim, head_dim);
            ad::Var<T> logits =
                ad::mul_scalar(ad::matmul(qh, ad::transpose(kh)), scale);
            ad::Var<T> attn = ad::softmax_rows(logits);
            ad::Var<T> ctx_h = ad::matmul(attn, vh);
            context = h == 0 ? ctx_h : ad::concat_cols(context, ctx_h);
        }
        x = ad::add(x, ad::matmul(context, blk.wo));

        ad::Var<T> z2 = ad::layer_norm_rows(x);
        ad::Var<T> pre = ad::add_row_broadcast(ad::matmul(z2, blk.ff_weight), blk.ff_bias);
        return ad::add(x, activate(pre, blk.ff_prelu));
    }

    static auto sinusoidal_table(Eigen::Index t_len, Eigen::Index d) -> Mat<T> {
        Mat<T> table(t_len, d);
        for (Eigen::Index i = 0; i < d / 2; ++i) {
            const double theta =
                std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            for (Eigen::Index t = 0; t < t_len; ++t) {
                const double angle = static_cast<double>(t) * theta;
                table(t, 2 * i) = static_cast<T>(std::sin(angle));
                table(t, 2 * i + 1) = static_cast<T>(std::cos(angle));
            }
        }
        return table;
    }

    ModelConfig cfg_;
    SincGeometry geom_;
    StftConfig stft_cfg_;
    ParamStore<T> params_;
    ad::Var<T> low_hz_, band_hz_;
    ad::Var<T> fusion_weight_, fusion_bias_, fusion_prelu_;
    std::vector<Block> blocks_;
    ad::Var<T> learned_pe_;
    ad::Var<T> head_weight_, head_bias_;
};

}  // namespace deepgesi
