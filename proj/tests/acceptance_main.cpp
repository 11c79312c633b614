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

// Acceptance suite: one self-contained check per release criterion, each
// printed as a single PASS / FAIL / SKIP line with its measured values. The
// exit code is the number of failed criteria. Criterion numbers may be given
// as arguments to run a subset (default: all).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deepgesi/audio.hpp"
#include "deepgesi/autodiff.hpp"
#include "deepgesi/checkpoint.hpp"
#include "deepgesi/config.hpp"
#include "deepgesi/errors.hpp"
#include "deepgesi/evaluation.hpp"
#include "deepgesi/labels.hpp"
#include "deepgesi/metrics.hpp"
#include "deepgesi/model.hpp"
#include "deepgesi/rng.hpp"
#include "deepgesi/rope.hpp"
#include "deepgesi/sinc.hpp"
#include "deepgesi/stft.hpp"
#include "deepgesi/training.hpp"
#include "support/fd.hpp"
#include "support/naive_dft.hpp"
#include "support/ref_metrics.hpp"
#include "support/tmpdir.hpp"
#include "support/wav_bytes.hpp"

using namespace deepgesi;
using namespace testsupport;
namespace adx = deepgesi::ad;

namespace {

// ---------------------------------------------------------------------------
// Reporting plumbing
// ---------------------------------------------------------------------------

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

auto pass(std::string detail) -> Outcome { return {Status::pass, std::move(detail)}; }
auto fail(std::string detail) -> Outcome { return {Status::fail, std::move(detail)}; }
auto skip(std::string detail) -> Outcome { return {Status::skip, std::move(detail)}; }

auto fmt(double v, const char* spec = "%.4g") -> std::string {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return {buf};
}

class Timer {
  public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] auto seconds() const -> double {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    [[nodiscard]] auto ms() const -> double { return seconds() * 1000.0; }

  private:
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient oracle
// ---------------------------------------------------------------------------

struct OpCase {
    std::string name;
    std::function<double(std::uint64_t)> run;  // one instance -> worst rel err
};

auto leaf_of(const MatD& m) -> VarD { return VarD::leaf(m, /*requires_grad=*/true); }

auto op_cases() -> std::vector<OpCase> {
    std::vector<OpCase> cases;
    auto unary = [&](const std::string& name, auto make, bool away_from_zero = false) {
        cases.push_back({name, [make, away_from_zero](std::uint64_t seed) {
                             const MatD x0 = away_from_zero
                                                 ? random_mat_nonzero(3, 4, seed)
                                                 : random_mat(3, 4, seed);
                             std::vector<VarD> leaves = {leaf_of(x0)};
                             auto graph = [&, make] { return make(leaves[0], seed); };
                             return fd_max_rel_error(leaves, graph);
                         }});
    };

    unary("add_scalar", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::add_scalar(x, 0.7), random_mat(3, 4, s + 900));
    });
    unary("mul_scalar", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::mul_scalar(x, -1.3), random_mat(3, 4, s + 900));
    });
    unary("abs", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::abs(x), random_mat(3, 4, s + 900));
    }, /*away_from_zero=*/true);
    unary("square", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::square(x), random_mat(3, 4, s + 900));
    });
    unary("sigmoid", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::sigmoid(x), random_mat(3, 4, s + 900));
    });
    unary("relu", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::relu(x), random_mat(3, 4, s + 900));
    }, true);
    unary("leaky_relu", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::leaky_relu(x, 0.01), random_mat(3, 4, s + 900));
    }, true);
    unary("transpose", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::transpose(x), random_mat(4, 3, s + 900));
    });
    unary("reshape", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::reshape(x, 2, 6), random_mat(2, 6, s + 900));
    });
    unary("slice_cols", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::slice_cols(x, 1, 2), random_mat(3, 2, s + 900));
    });
    unary("slice_rows", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::slice_rows(x, 1, 2), random_mat(2, 4, s + 900));
    });
    unary("sum_all", [](VarD& x, std::uint64_t) { return adx::sum_all(x); });
    unary("mean_all", [](VarD& x, std::uint64_t) { return adx::mean_all(x); });
    unary("softmax_rows", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::softmax_rows(x), random_mat(3, 4, s + 900));
    });
    unary("maxout", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::maxout(x, 2), random_mat(3, 2, s + 900));
    });
    unary("layer_norm_rows", [](VarD& x, std::uint64_t s) {
        return weighted_sum(adx::layer_norm_rows(x, 1e-5), random_mat(3, 4, s + 900));
    });

    cases.push_back({"log_eps", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(3, 4, seed, 0.1, 2.0))};
                         auto graph = [&] {
                             return weighted_sum(adx::log_eps(leaves[0], 1e-8),
                                                 random_mat(3, 4, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"prelu", [](std::uint64_t seed) {
                         MatD slope(1, 1);
                         slope(0, 0) = 0.25;
                         std::vector<VarD> leaves = {leaf_of(random_mat_nonzero(3, 4, seed)),
                                                     leaf_of(slope)};
                         auto graph = [&] {
                             return weighted_sum(adx::prelu(leaves[0], leaves[1]),
                                                 random_mat(3, 4, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});

    auto binary = [&](const std::string& name, auto make) {
        cases.push_back({name, [make](std::uint64_t seed) {
                             std::vector<VarD> leaves = {leaf_of(random_mat(3, 4, seed)),
                                                         leaf_of(random_mat(3, 4, seed + 7))};
                             auto graph = [&, make] {
                                 return weighted_sum(make(leaves[0], leaves[1]),
                                                     random_mat(3, 4, seed + 900));
                             };
                             return fd_max_rel_error(leaves, graph);
                         }});
    };
    binary("add", [](VarD& a, VarD& b) { return adx::add(a, b); });
    binary("sub", [](VarD& a, VarD& b) { return adx::sub(a, b); });
    binary("mul", [](VarD& a, VarD& b) { return adx::mul(a, b); });

    cases.push_back({"add_row_broadcast", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(4, 5, seed)),
                                                     leaf_of(random_mat(1, 5, seed + 7))};
                         auto graph = [&] {
                             return weighted_sum(adx::add_row_broadcast(leaves[0], leaves[1]),
                                                 random_mat(4, 5, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"matmul", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(3, 4, seed)),
                                                     leaf_of(random_mat(4, 5, seed + 7))};
                         auto graph = [&] {
                             return weighted_sum(adx::matmul(leaves[0], leaves[1]),
                                                 random_mat(3, 5, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"concat_cols", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(3, 2, seed)),
                                                     leaf_of(random_mat(3, 3, seed + 7))};
                         auto graph = [&] {
                             return weighted_sum(adx::concat_cols(leaves[0], leaves[1]),
                                                 random_mat(3, 5, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"unfold_rows", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(6, 3, seed))};
                         auto graph = [&] {
                             return weighted_sum(adx::unfold_rows(leaves[0], 3, 1, 1),
                                                 random_mat(6, 9, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"conv1d", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(6, 3, seed)),
                                                     leaf_of(random_mat(9, 2, seed + 7)),
                                                     leaf_of(random_mat(1, 2, seed + 13))};
                         auto graph = [&] {
                             return weighted_sum(
                                 adx::conv1d(leaves[0], leaves[1], leaves[2], 3, 1, 0),
                                 random_mat(4, 2, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"avg_pool_cols", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat(3, 12, seed))};
                         auto graph = [&] {
                             return weighted_sum(adx::avg_pool_cols(leaves[0], 4, 2),
                                                 random_mat(3, 5, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"abs_avg_pool_cols", [](std::uint64_t seed) {
                         std::vector<VarD> leaves = {leaf_of(random_mat_nonzero(3, 12, seed))};
                         auto graph = [&] {
                             return weighted_sum(adx::abs_avg_pool_cols(leaves[0], 4, 2),
                                                 random_mat(3, 5, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"signal_conv_symmetric", [](std::uint64_t seed) {
                         Rng rng(seed);
                         std::vector<double> x(24);
                         for (auto& v : x) { v = rng.uniform(-1.0, 1.0); }
                         auto xpad = adx::pad_signal(x, 9);
                         std::vector<VarD> leaves = {leaf_of(random_mat(2, 9, seed + 7))};
                         auto graph = [&] {
                             return weighted_sum(
                                 adx::signal_conv_symmetric(xpad, 24, leaves[0]),
                                 random_mat(2, 24, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"sinc_kernels", [](std::uint64_t seed) {
                         SincGeometry geom;
                         geom.num_filters = 4;
                         geom.kernel_length = 17;
                         std::vector<VarD> leaves = {
                             leaf_of(random_mat(1, 4, seed, 100.0, 2500.0)),
                             leaf_of(random_mat(1, 4, seed + 7, 150.0, 3000.0))};
                         auto graph = [&] {
                             return weighted_sum(
                                 sinc_kernels(leaves[0], leaves[1], geom),
                                 random_mat(4, 17, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    cases.push_back({"apply_rope", [](std::uint64_t seed) {
                         const auto table = RopeTable<double>::build(6, 8);
                         std::vector<VarD> leaves = {leaf_of(random_mat(6, 8, seed))};
                         auto graph = [&] {
                             return weighted_sum(apply_rope(leaves[0], table),
                                                 random_mat(6, 8, seed + 900));
                         };
                         return fd_max_rel_error(leaves, graph);
                     }});
    return cases;
}

// Full-network gradient check: a small 64-bit model, the real loss, finite
// differences over sampled entries of every parameter tensor.
auto end_to_end_fd_error(std::uint64_t seed) -> double {
    RunConfig cfg;
    cfg.stft.win_length = 32;
    cfg.stft.hop_length = 16;
    cfg.stft.fft_size = 32;
    cfg.model.d_model = 8;
    cfg.model.n_heads = 2;
    cfg.model.n_blocks = 2;
    cfg.model.conv_channels = 8;
    cfg.lfb_filters = 4;
    cfg.lfb_kernel = 9;
    Model<double> model(cfg.model, cfg.sinc_geometry(), cfg.stft, seed);

    Rng rng(splitmix64(seed, 0xe2e));
    std::vector<double> x(200);
    for (auto& v : x) { v = rng.uniform(-0.5, 0.5); }
    AudioBuffer buf;
    buf.samples.assign(x.begin(), x.end());
    buf.sample_rate_hz = 16000;
    const MatD stft = stft_features(buf, cfg.stft).cast<double>();
    const double target = 0.4;

    auto loss_of = [&] {
        auto out = model.forward(x, stft);
        return utterance_loss<double>(out, target, 1.0);
    };
    auto loss = loss_of();
    model.params().zero_grads();
    loss.backward();

    const double h = 1e-5;
    double worst = 0.0;
    for (auto& [name, var] : model.params().items()) {
        const MatD grad =
            var.grad().size() > 0 ? var.grad() : MatD::Zero(var.rows(), var.cols());
        Rng pick(splitmix64(seed, std::hash<std::string>{}(name)));
        for (int s = 0; s < 2; ++s) {
            const auto r =
                static_cast<Eigen::Index>(pick.index(static_cast<std::uint64_t>(var.rows())));
            const auto c =
                static_cast<Eigen::Index>(pick.index(static_cast<std::uint64_t>(var.cols())));
            const double orig = var.value()(r, c);
            var.value()(r, c) = orig + h;
            const double up = loss_of().item();
            var.value()(r, c) = orig - h;
            const double down = loss_of().item();
            var.value()(r, c) = orig;
            const double fd = (up - down) / (2.0 * h);
            const double ad = grad(r, c);
            worst = std::max(worst,
                             std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)}));
        }
    }
    return worst;
}

auto criterion1() -> Outcome {
    Timer timer;
    constexpr int kInstances = 20;
    constexpr double kPerOpTol = 1e-4;
    constexpr double kEndToEndTol = 1e-3;

    double worst_op_err = 0.0;
    std::string worst_op;
    for (const auto& op : op_cases()) {
        double err = 0.0;
        for (int i = 0; i < kInstances; ++i) {
            err = std::max(err, op.run(static_cast<std::uint64_t>(i) * 7919 + 1));
        }
        if (err > worst_op_err) {
            worst_op_err = err;
            worst_op = op.name;
        }
        if (err > kPerOpTol) {
            return fail("op '" + op.name + "' worst rel err " + fmt(err) + " > 1e-4 (h=1e-5, " +
                        std::to_string(kInstances) + " instances)");
        }
    }

    double e2e = 0.0;
    for (std::uint64_t seed : {5ULL, 6ULL}) { e2e = std::max(e2e, end_to_end_fd_error(seed)); }
    const double elapsed = timer.seconds();
    if (e2e > kEndToEndTol) {
        return fail("end-to-end rel err " + fmt(e2e) + " > 1e-3");
    }
    if (elapsed > 120.0) {
        return fail("runtime " + fmt(elapsed) + " s exceeds the 2 min budget");
    }
    return pass("every op < 1e-4 (worst " + fmt(worst_op_err) + " on " + worst_op +
                "), end-to-end " + fmt(e2e) + " < 1e-3; " + std::to_string(kInstances) +
                " instances/op, h=1e-5, " + fmt(elapsed, "%.1f") + " s");
}

// ---------------------------------------------------------------------------
// Criterion 2: rotary positional encoding depends only on displacement
// ---------------------------------------------------------------------------

auto criterion2() -> Outcome {
    constexpr Eigen::Index kDim = 64;
    const std::vector<Eigen::Index> offsets = {1, 5, 50};
    const std::vector<Eigen::Index> bases = {0, 10, 100, 1000};
    double worst_spread = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const MatD q = random_mat(1, kDim, seed);
        const MatD k = random_mat(1, kDim, seed + 100);
        for (const auto delta : offsets) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto t : bases) {
                const auto tq = RopeTable<double>::build(1, kDim, t);
                const auto tk = RopeTable<double>::build(1, kDim, t + delta);
                const MatD rq = apply_rope(VarD::leaf(q), tq).value();
                const MatD rk = apply_rope(VarD::leaf(k), tk).value();
                const double dot = (rq.row(0) * rk.row(0).transpose())(0, 0);
                lo = std::min(lo, dot);
                hi = std::max(hi, dot);
            }
            worst_spread = std::max(worst_spread, hi - lo);
        }
    }
    if (worst_spread >= 1e-5) {
        return fail("dot(rope(q,t), rope(k,t+d)) varies by " + fmt(worst_spread) +
                    " >= 1e-5 across t");
    }
    return pass("d=64, offsets {1,5,50}, bases {0,10,100,1000}: max variation " +
                fmt(worst_spread) + " < 1e-5");
}

// ---------------------------------------------------------------------------
// Criterion 3: sinc kernels are band-pass filters
// ---------------------------------------------------------------------------

auto criterion3() -> Outcome {
    constexpr int kLen = 129;
    constexpr int kSr = 16000;
    Rng rng(33);
    double worst_margin_db = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 10; ++trial) {
        const double f1 = rng.uniform(1000.0, 2500.0);
        const double f2 = f1 + rng.uniform(400.0, 1400.0);  // 2*f2 stays below Nyquist
        const auto kernel = sinc_kernel_row<double>(f1, f2, kLen, kSr);
        const double center = dtft_magnitude(kernel, (f1 + f2) / 2.0, kSr);
        const double below = dtft_magnitude(kernel, f1 / 2.0, kSr);
        const double above = dtft_magnitude(kernel, 2.0 * f2, kSr);
        const double outside = std::max(below, above);
        const double margin_db = 20.0 * std::log10(center / std::max(outside, 1e-300));
        worst_margin_db = std::min(worst_margin_db, margin_db);
        if (margin_db < 20.0) {
            return fail("band [" + fmt(f1, "%.0f") + ", " + fmt(f2, "%.0f") +
                        "] Hz: center is only " + fmt(margin_db, "%.1f") +
                        " dB above one octave outside (need >= 20)");
        }
    }

    const auto zero = sinc_kernel_row<double>(1500.0, 1500.0, kLen, kSr);
    for (const double v : zero) {
        if (v != 0.0) { return fail("f1 == f2 kernel is not exactly zero"); }
    }
    return pass("10 random bands: center >= one octave outside by >= 20 dB (worst " +
                fmt(worst_margin_db, "%.1f") + " dB); f1 == f2 gives the exact zero kernel");
}

// ---------------------------------------------------------------------------
// Criterion 4: frozen two-piece maxout realizes ReLU exactly
// ---------------------------------------------------------------------------

auto criterion4() -> Outcome {
    constexpr int kN = 10000;
    Rng rng(44);
    MatD x(kN, 1);
    for (int i = 0; i < kN; ++i) { x(i, 0) = rng.uniform(-3.0, 3.0); }
    x(0, 0) = 0.0;  // include the kink itself
    x(1, 0) = -0.0;

    MatD w(1, 2);
    w << 1.0, 0.0;  // pieces {x, 0}
    auto via_maxout = adx::maxout(adx::matmul(VarD::leaf(x), VarD::leaf(w)), 2);
    auto via_relu = adx::relu(VarD::leaf(x));

    int mismatches = 0;
    for (int i = 0; i < kN; ++i) {
        if (via_maxout.value()(i, 0) != via_relu.value()(i, 0)) { ++mismatches; }
    }
    if (mismatches != 0) {
        return fail(std::to_string(mismatches) + " of " + std::to_string(kN) +
                    " inputs differ between frozen maxout and ReLU");
    }
    return pass("frozen 2-piece maxout equals ReLU on all " + std::to_string(kN) +
                " random inputs exactly");
}

// ---------------------------------------------------------------------------
// Criterion 5: loss identity on the worked example
// ---------------------------------------------------------------------------

auto criterion5() -> Outcome {
    MatD frames(2, 1);
    frames << 0.5, 0.9;
    MatD utt(1, 1);
    utt << 0.7;
    ForwardResult<double> out{VarD::leaf(frames), VarD::leaf(utt)};
    const double loss = utterance_loss(out, 0.5, 1.0).item();
    if (loss != 0.12) {
        return fail("B=1, y=0.5, yhat=0.7, frames [0.5, 0.9]: got " + fmt(loss, "%.17g") +
                    ", expected exactly 0.12");
    }
    return pass("B=1, y=0.5, yhat=0.7, frames [0.5, 0.9] gives L = 0.12 exactly at 64-bit");
}

// ---------------------------------------------------------------------------
// Criterion 6: overfit sanity on 32 synthetic utterances
// ---------------------------------------------------------------------------

auto criterion6() -> Outcome {
    Timer timer;
    TempDir data;
    const std::string manifest = synth_dataset(32, 4242, data.str());
    auto entries = load_manifest(manifest);
    for (auto& e : entries) { e.split = Split::train; }  // overfit the whole set

    RunConfig cfg;  // default architecture and optimizer
    cfg.train.max_steps = 2000;
    cfg.train.target_train_loss = 1e-3;
    cfg.train.max_epochs = 1000;           // stopping is governed by the caps above
    cfg.train.early_stop_patience = 100000;

    TempDir run_a;
    Timer first_run;
    auto res_a = train_model(cfg, entries, {.out_dir = run_a.str(), .quiet = true});
    const double run_seconds = first_run.seconds();

    if (!(res_a.final_train_loss < 1e-3)) {
        return fail("train loss " + fmt(res_a.final_train_loss) + " after " +
                    std::to_string(res_a.steps) + " steps (need < 1e-3 within 2000)");
    }
    if (res_a.steps > 2000) {
        return fail("took " + std::to_string(res_a.steps) + " steps > 2000");
    }
    if (run_seconds > 600.0) {
        return fail("run took " + fmt(run_seconds, "%.0f") + " s, over the 10 min budget");
    }

    TempDir run_b;
    auto res_b = train_model(cfg, entries, {.out_dir = run_b.str(), .quiet = true});
    const bool same_ckpt =
        read_bytes(res_a.last_checkpoint) == read_bytes(res_b.last_checkpoint);
    const bool same_metrics = read_bytes(res_a.metrics_csv) == read_bytes(res_b.metrics_csv);
    if (!same_ckpt || !same_metrics) {
        return fail("two same-seed runs differ (checkpoint identical: " +
                    std::string(same_ckpt ? "yes" : "no") + ", metrics identical: " +
                    std::string(same_metrics ? "yes" : "no") + ")");
    }
    return pass("train loss " + fmt(res_a.final_train_loss) + " < 1e-3 in " +
                std::to_string(res_a.steps) + " steps; two same-seed runs byte-identical; " +
                fmt(run_seconds, "%.0f") + " s/run (budget 600), total " +
                fmt(timer.seconds(), "%.0f") + " s");
}

// ---------------------------------------------------------------------------
// Criteria 7 + 8: generalization on a 512/64 synthetic corpus, plus the
// soft ablation-direction check on the same setup
// ---------------------------------------------------------------------------

struct GenWorld {
    TempDir data;
    std::vector<ManifestEntry> entries;  // 464 train / 48 val / 64 test
    RunConfig cfg;                       // default model, capped epochs
    std::unique_ptr<TempDir> run_base;
    double base_lcc = 0.0;
    double base_srcc = 0.0;
    double build_seconds = 0.0;
    std::string error;

    GenWorld() {
        try {
            Timer timer;
            const std::string manifest = synth_dataset(576, 20250, data.str());
            auto all = load_manifest(manifest);
            // 512 training-pool utterances (464 for gradients, 48 monitoring
            // early stopping) and 64 held out for the generalization metrics.
            SplitRatios ratios{464.0 / 576.0, 48.0 / 576.0, 64.0 / 576.0};
            auto parts = split_dataset(all, ratios, 7);
            entries.clear();
            for (auto& e : parts.train) { e.split = Split::train; entries.push_back(e); }
            for (auto& e : parts.val) { e.split = Split::val; entries.push_back(e); }
            for (auto& e : parts.test) { e.split = Split::test; entries.push_back(e); }

            cfg.train.max_epochs = 15;
            cfg.train.early_stop_patience = 4;

            auto [lcc_v, srcc_v] = train_and_eval(cfg, run_base);
            base_lcc = lcc_v;
            base_srcc = srcc_v;
            build_seconds = timer.seconds();
        } catch (const std::exception& e) {
            error = e.what();
        }
    }

    // Trains one variant on the shared corpus and returns held-out (LCC, SRCC).
    auto train_and_eval(const RunConfig& variant, std::unique_ptr<TempDir>& run_dir)
        -> std::pair<double, double> {
        run_dir = std::make_unique<TempDir>();
        auto res = train_model(variant, entries, {.out_dir = run_dir->str(), .quiet = true});
        LoadedModel loaded = load_model(res.best_checkpoint);
        EvalReport report = evaluate_model(
            loaded.model, loaded.config, entries,
            {.out_dir = run_dir->sub("eval"), .split = Split::test, .condition = "held-out"});
        return {report.lcc, report.srcc};
    }
};

auto gen_world() -> GenWorld& {
    static GenWorld world;
    return world;
}

auto criterion7() -> Outcome {
    GenWorld& world = gen_world();
    if (!world.error.empty()) { return fail("setup failed: " + world.error); }
    if (world.build_seconds > 2700.0) {
        return fail("runtime " + fmt(world.build_seconds, "%.0f") +
                    " s exceeds the 45 min budget");
    }
    if (world.base_lcc < 0.8 || world.base_srcc < 0.75) {
        return fail("held-out LCC " + fmt(world.base_lcc) + " (need >= 0.8), SRCC " +
                    fmt(world.base_srcc) + " (need >= 0.75)");
    }
    return pass("512 train / 64 held-out: LCC " + fmt(world.base_lcc) + " >= 0.8, SRCC " +
                fmt(world.base_srcc) + " >= 0.75; " + fmt(world.build_seconds, "%.0f") +
                " s (budget 2700)");
}

auto criterion8() -> Outcome {
    GenWorld& world = gen_world();
    if (!world.error.empty()) { return fail("setup failed: " + world.error); }
    try {
        RunConfig relu_cfg = world.cfg;
        relu_cfg.model.activation = Activation::relu;
        std::unique_ptr<TempDir> run_relu;
        const auto [relu_lcc, relu_srcc] = world.train_and_eval(relu_cfg, run_relu);

        RunConfig learned_cfg = world.cfg;
        learned_cfg.model.positional_encoding = PositionalEncoding::learned;
        std::unique_ptr<TempDir> run_learned;
        const auto [learned_lcc, learned_srcc] =
            world.train_and_eval(learned_cfg, run_learned);

        std::string detail = "held-out LCC: maxout " + fmt(world.base_lcc) + " vs relu " +
                             fmt(relu_lcc) + "; rope " + fmt(world.base_lcc) +
                             " vs learned-pe " + fmt(learned_lcc);
        if (world.base_lcc < relu_lcc) {
            detail += "; warning: ReLU beat Maxout here (desk-scale noise can reverse this)";
        }
        if (world.base_lcc < learned_lcc) {
            detail += "; warning: learned PE beat RoPE here (desk-scale noise can reverse this)";
        }
        return pass(detail + " (soft check, reported not gated)");
    } catch (const std::exception& e) {
        return fail(std::string("ablation training failed: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Criterion 9: metric oracles
// ---------------------------------------------------------------------------

auto criterion9() -> Outcome {
    Rng rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng.index(78);
        std::vector<double> a(n);
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-5.0, 5.0);
            b[i] = trial % 3 == 0 ? std::round(rng.uniform(-3.0, 3.0))  // force ties
                                  : rng.uniform(-5.0, 5.0);
        }
        worst = std::max(worst, std::abs(mse(a, b) - ref_mse(a, b)));
        worst = std::max(worst, std::abs(lcc(a, b) - ref_pearson(a, b)));
        worst = std::max(worst, std::abs(srcc(a, b) - ref_spearman(a, b)));
        if (worst > 1e-12) {
            return fail("metric deviates from the brute-force reference by " + fmt(worst) +
                        " > 1e-12 (trial " + std::to_string(trial) + ", n=" +
                        std::to_string(n) + ")");
        }
    }
    return pass("mse/lcc/srcc match brute-force references on 100 vectors (ties included), "
                "worst abs diff " +
                fmt(worst) + " <= 1e-12");
}

// ---------------------------------------------------------------------------
// Criterion 10: end-to-end latency on 6-second utterances
// ---------------------------------------------------------------------------

auto six_second_utterance(std::uint64_t seed) -> std::vector<float> {
    Rng rng(seed);
    constexpr int kN = 96000;
    std::vector<float> x(kN, 0.0F);
    for (int tone = 0; tone < 4; ++tone) {
        const double freq = rng.uniform(100.0, 4000.0);
        const double amp = rng.uniform(0.05, 0.15);
        for (int i = 0; i < kN; ++i) {
            x[static_cast<std::size_t>(i)] += static_cast<float>(
                amp * std::sin(2.0 * std::numbers::pi * freq * i / 16000.0));
        }
    }
    for (int i = 0; i < kN; ++i) {
        const double env = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 3.0 * i / 16000.0);
        x[static_cast<std::size_t>(i)] += static_cast<float>(0.08 * env * rng.normal());
    }
    return x;
}

auto criterion10() -> Outcome {
    RunConfig cfg;  // default architecture, 32-bit, single thread
    Model<float> model(cfg.model, cfg.sinc_geometry(), cfg.stft, 1234);
    constexpr int kUtterances = 8;
    constexpr int kReps = 6;

    // The host may run other tenants; the minimum over repetitions estimates
    // the undisturbed cost of each utterance, and the criterion averages that
    // over utterances.
    std::vector<double> per_utt_ms;
    for (int u = 0; u < kUtterances; ++u) {
        const auto samples = six_second_utterance(1000 + static_cast<std::uint64_t>(u));
        AudioBuffer buf;
        buf.samples = samples;
        buf.sample_rate_hz = 16000;
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < kReps; ++rep) {
            Timer timer;
            const MatF stft = stft_features(buf, cfg.stft);
            ForwardResult<float> out = model.forward(samples, stft);
            const double ms = timer.ms();
            if (!std::isfinite(static_cast<double>(out.utterance_score.item()))) {
                return fail("non-finite score during timing");
            }
            best = std::min(best, ms);
        }
        per_utt_ms.push_back(best);
    }
    double mean_ms = 0.0;
    for (const double v : per_utt_ms) { mean_ms += v; }
    mean_ms /= per_utt_ms.size();
    if (mean_ms > 50.0) {
        return fail("mean end-to-end inference " + fmt(mean_ms, "%.1f") +
                    " ms per 6 s utterance > 50 ms");
    }
    return pass("mean end-to-end inference " + fmt(mean_ms, "%.1f") +
                " ms per 6 s utterance (8 utterances, best of " + std::to_string(kReps) +
                " runs each) <= 50 ms, single thread, 32-bit");
}

// ---------------------------------------------------------------------------
// Criterion 11: checkpoint round-trip and resume equivalence
// ---------------------------------------------------------------------------

auto criterion11() -> Outcome {
    TempDir data;
    const auto entries = load_manifest(synth_dataset(12, 909, data.str()));

    RunConfig cfg;  // default model
    cfg.train.max_epochs = 4;

    TempDir run_full;
    auto full = train_model(cfg, entries, {.out_dir = run_full.str(), .quiet = true});

    // Byte-identical save -> load -> save.
    const auto original = read_bytes(full.last_checkpoint);
    Checkpoint ckpt = load_checkpoint(full.last_checkpoint);
    const std::string copy = run_full.sub("copy.bin");
    save_checkpoint(copy, ckpt);
    if (read_bytes(copy) != original) {
        return fail("save -> load -> save is not byte-identical");
    }

    // Interrupted-at-2 + resumed-to-4 equals the uninterrupted 4-epoch run.
    RunConfig cfg_half = cfg;
    cfg_half.train.max_epochs = 2;
    TempDir run_half;
    auto half = train_model(cfg_half, entries, {.out_dir = run_half.str(), .quiet = true});
    TempDir run_resumed;
    auto resumed = train_model(cfg, entries,
                               {.out_dir = run_resumed.str(),
                                .resume_checkpoint = half.last_checkpoint,
                                .quiet = true});

    const Checkpoint ck_full = load_checkpoint(full.last_checkpoint);
    const Checkpoint ck_res = load_checkpoint(resumed.last_checkpoint);
    if (ck_full.tensors.size() != ck_res.tensors.size()) {
        return fail("resumed checkpoint has a different tensor list");
    }
    float worst = 0.0F;
    for (std::size_t i = 0; i < ck_full.tensors.size(); ++i) {
        if (ck_full.tensors[i].first != ck_res.tensors[i].first) {
            return fail("tensor order differs after resume");
        }
        worst = std::max(worst, (ck_full.tensors[i].second - ck_res.tensors[i].second)
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    if (worst > 1e-6F) {
        return fail("resumed weights differ from the uninterrupted run by " +
                    fmt(static_cast<double>(worst)) + " > 1e-6");
    }
    return pass("save -> load -> save byte-identical; resume(2+2) matches uninterrupted(4) "
                "within " +
                fmt(static_cast<double>(worst)) + " <= 1e-6 at 32-bit");
}

// ---------------------------------------------------------------------------
// Criterion 12: conditional evaluation on user-supplied reference data
// ---------------------------------------------------------------------------

auto criterion12() -> Outcome {
    const char* manifest_env = std::getenv("DEEPGESI_CPC2_MANIFEST");
    if (manifest_env == nullptr || *manifest_env == '\0') {
        return skip("no reference corpus supplied; set DEEPGESI_CPC2_MANIFEST to a "
                    "`audio_path,target,split` CSV (and DEEPGESI_CPC2_CHECKPOINT to a trained "
                    "model) to report MSE/LCC/SRCC against the published "
                    "0.0034/0.9289/0.9212");
    }
    const char* ckpt_env = std::getenv("DEEPGESI_CPC2_CHECKPOINT");
    if (ckpt_env == nullptr || *ckpt_env == '\0') {
        return skip("DEEPGESI_CPC2_MANIFEST is set but DEEPGESI_CPC2_CHECKPOINT is not; a "
                    "trained checkpoint is required to score the reference corpus");
    }
    try {
        LoadedModel loaded = load_model(ckpt_env);
        auto entries = load_manifest(manifest_env);
        bool has_unseen = false;
        for (const auto& e : entries) {
            if (e.split == Split::unseen) {
                has_unseen = true;
                break;
            }
        }
        TempDir out;
        EvalReport report = evaluate_model(
            loaded.model, loaded.config, entries,
            {.out_dir = out.str(),
             .split = has_unseen ? std::optional<Split>(Split::unseen) : std::nullopt,
             .condition = "reference"});
        return pass("reference corpus (" + std::to_string(report.pairs.size()) +
                    " signals): MSE " + fmt(report.mse) + " / LCC " + fmt(report.lcc) +
                    " / SRCC " + fmt(report.srcc) +
                    "; published baselines 0.0034 / 0.9289 / 0.9212 (report-only, no gate)");
    } catch (const std::exception& e) {
        return fail(std::string("reference evaluation failed: ") + e.what());
    }
}

}  // namespace

auto main(int argc, char** argv) -> int {
    std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, criterion1},  {2, criterion2},  {3, criterion3},  {4, criterion4},
        {5, criterion5},  {6, criterion6},  {7, criterion7},  {8, criterion8},
        {9, criterion9},  {10, criterion10}, {11, criterion11}, {12, criterion12},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        try {
            selected.insert(std::stoi(argv[i]));
        } catch (const std::exception&) {
            std::cerr << "usage: " << argv[0] << " [criterion numbers...]\n";
            return 1;
        }
    }

    int failures = 0;
    int passed = 0;
    int skipped = 0;
    for (const auto& [id, fn] : criteria) {
        if (!selected.empty() && !selected.contains(id)) { continue; }
        Outcome outcome;
        try {
            outcome = fn();
        } catch (const std::exception& e) {
            outcome = fail(std::string("unexpected exception: ") + e.what());
        }
        const char* label = outcome.status == Status::pass   ? "PASS"
                            : outcome.status == Status::skip ? "SKIP"
                                                             : "FAIL";
        std::cout << "criterion " << id << ": " << label << " (" << outcome.detail << ")"
                  << std::endl;
        failures += outcome.status == Status::fail ? 1 : 0;
        passed += outcome.status == Status::pass ? 1 : 0;
        skipped += outcome.status == Status::skip ? 1 : 0;
    }
    std::cout << "acceptance: " << passed << " passed, " << failures << " failed, " << skipped
              << " skipped" << std::endl;
    return failures;
}
