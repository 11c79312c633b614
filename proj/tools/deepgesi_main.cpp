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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deepgesi/checkpoint.hpp"
#include "deepgesi/config.hpp"
#include "deepgesi/errors.hpp"
#include "deepgesi/evaluation.hpp"
#include "deepgesi/labels.hpp"
#include "deepgesi/model.hpp"
#include "deepgesi/training.hpp"

namespace {

using namespace deepgesi;

auto fmt(double v) -> std::string {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return {buf};
}

// Shared convenience overrides accepted by several subcommands. Each one maps
// onto a config key; explicit --set pairs are applied last and win.
struct ConfigFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> target_sr;
    std::optional<std::string> activation;
    std::optional<std::string> positional_encoding;
    std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--config", flags.config_path, "INI config file with run settings");
    cmd->add_option("--seed", flags.seed, "Override train.seed");
    cmd->add_option("--target-sr", flags.target_sr,
                    "Resample input audio to this rate in Hz (default 16000)");
    cmd->add_option("--activation", flags.activation,
                    "Activation: maxout, relu, leaky_relu, or prelu");
    cmd->add_option("--pe", flags.positional_encoding,
                    "Positional encoding: rope, sinusoidal, learned, or none");
    cmd->add_option("--set", flags.sets, "Override any config key, e.g. --set lr=3e-4")
        ->type_name("KEY=VALUE");
}

auto resolve_config(const ConfigFlags& flags) -> RunConfig {
    RunConfig cfg;
    if (!flags.config_path.empty()) { cfg = load_config_file(flags.config_path); }
    if (flags.seed) { cfg.train.seed = *flags.seed; }
    if (flags.target_sr) { cfg.target_sr = *flags.target_sr; }
    if (flags.activation) { cfg.apply("activation", *flags.activation); }
    if (flags.positional_encoding) {
        cfg.apply("positional_encoding", *flags.positional_encoding);
    }
    for (const auto& pair : flags.sets) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError("--set expects KEY=VALUE, got '" + pair + "'");
        }
        cfg.apply(pair.substr(0, eq), pair.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

auto parse_split_or_all(const std::string& name) -> std::optional<Split> {
    if (name == "all") { return std::nullopt; }
    return split_from_string(name);
}

void run_synth(int n, std::uint64_t seed, const std::string& out_dir) {
    const std::string manifest = synth_dataset(n, seed, out_dir);
    // Echo the generation settings so the dataset is reproducible from its
    // own directory.
    write_text_file((std::filesystem::path(out_dir) / "synth.ini").string(),
                    "n = " + std::to_string(n) + "\nseed = " + std::to_string(seed) + "\n");
    std::cout << manifest << '\n';
}

void run_train(const std::string& manifest_path, const std::string& out_dir,
               const std::string& resume, bool quiet, const ConfigFlags& flags) {
    const RunConfig cfg = resolve_config(flags);
    const auto entries = load_manifest(manifest_path);
    TrainOptions opts;
    opts.out_dir = out_dir;
    opts.resume_checkpoint = resume;
    opts.quiet = quiet;
    const TrainResult result = train_model(cfg, entries, opts);
    std::cout << "trained " << result.epochs_run << " epochs (" << result.steps
              << " steps), final train loss " << fmt(result.final_train_loss) << '\n';
    std::cout << "best checkpoint: " << result.best_checkpoint << " (monitored loss "
              << fmt(result.best_val_loss) << ")\n";
}

void run_predict(const std::string& checkpoint_path, const std::vector<std::string>& wavs) {
    LoadedModel loaded = load_model(checkpoint_path);
    std::size_t failed = 0;
    for (const auto& wav : wavs) {
        try {
            PreparedUtterance utt =
                prepare_utterance(wav, /*target=*/0.0, Split::unseen, loaded.config);
            ForwardResult<float> out = loaded.model.forward(utt.samples, utt.stft);
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f",
                          static_cast<double>(out.utterance_score.item()));
            std::cout << wav << '\t' << buf << '\n';
        } catch (const std::exception& e) {
            std::cerr << wav << ": " << e.what() << '\n';
            ++failed;
        }
    }
    if (failed > 0) {
        throw DataError(std::to_string(failed) + " of " + std::to_string(wavs.size()) +
                        " files could not be scored");
    }
}

void run_evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                  const std::string& out_dir, const std::string& split_name,
                  const std::string& condition, int threads) {
    LoadedModel loaded = load_model(checkpoint_path);
    const auto entries = load_manifest(manifest_path);
    EvalOptions opts;
    opts.out_dir = out_dir;
    opts.split = parse_split_or_all(split_name);
    opts.condition = condition;
    opts.checkpoint_label = checkpoint_path;
    opts.manifest_label = manifest_path;
    opts.max_threads = threads;
    const EvalReport report = evaluate_model(loaded.model, loaded.config, entries, opts);
    write_text_file((std::filesystem::path(out_dir) / "config.ini").string(),
                    loaded.config.to_ini());
    std::cout << "condition: " << report.condition << '\n';
    std::cout << "n_evaluated: " << report.pairs.size() << '\n';
    std::cout << "mse: " << fmt(report.mse) << '\n';
    std::cout << "lcc: " << fmt(report.lcc) << '\n';
    std::cout << "srcc: " << fmt(report.srcc) << '\n';
    std::cout << "latency_mean_ms: " << fmt(report.latency.mean_ms) << '\n';
    std::cout << "report: " << report.report_path << '\n';
    if (!report.failures.empty()) {
        for (const auto& failure : report.failures) {
            std::cerr << "failed: " << failure << '\n';
        }
        throw DataError(std::to_string(report.failures.size()) +
                        " utterances failed during evaluation");
    }
}

void run_bench(const std::string& checkpoint_path, const std::string& manifest_path, int n,
               int warmup, const std::string& split_name, bool forward_only,
               std::uint64_t seed) {
    LoadedModel loaded = load_model(checkpoint_path);
    const auto entries = load_manifest(manifest_path);
    BenchOptions opts;
    opts.n = n;
    opts.warmup = warmup;
    opts.forward_only = forward_only;
    opts.seed = seed;
    opts.split = parse_split_or_all(split_name);
    const BenchResult result = bench_model(loaded.model, loaded.config, entries, opts);
    std::cout << "n_timed: " << result.n_timed << '\n';
    std::cout << "forward_only: " << (result.forward_only ? "true" : "false") << '\n';
    std::cout << "latency_mean_ms: " << fmt(result.latency.mean_ms) << '\n';
    std::cout << "latency_p50_ms: " << fmt(result.latency.p50_ms) << '\n';
    std::cout << "latency_p95_ms: " << fmt(result.latency.p95_ms) << '\n';
    std::cout << "throughput_utt_per_s: " << fmt(result.throughput_utt_per_s) << '\n';
    std::cout << "realtime_factor: " << fmt(result.realtime_factor) << '\n';
}

}  // namespace

auto main(int argc, char** argv) -> int {
    CLI::App app{"DeepGESI: non-intrusive neural speech-intelligibility prediction"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    int synth_n = 0;
    std::uint64_t synth_seed = 1234;
    std::string synth_out;
    synth->add_option("--n", synth_n, "Number of utterances")
        ->required()
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generation seed");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->callback([&]() { run_synth(synth_n, synth_seed, synth_out); });

    // train
    auto* train = app.add_subcommand("train", "Train a model from a manifest");
    std::string train_manifest;
    std::string train_out;
    std::string train_resume;
    bool train_quiet = false;
    ConfigFlags train_flags;
    train->add_option("--manifest", train_manifest, "CSV manifest (audio_path,target,split)")
        ->required();
    train->add_option("--out", train_out, "Output directory for checkpoints and logs")
        ->required();
    train->add_option("--resume", train_resume, "Resume from this checkpoint");
    train->add_flag("--quiet", train_quiet, "Suppress per-epoch progress lines");
    add_config_flags(train, train_flags);
    train->callback(
        [&]() { run_train(train_manifest, train_out, train_resume, train_quiet, train_flags); });

    // predict
    auto* predict = app.add_subcommand("predict", "Score WAV files with a trained model");
    std::string predict_ckpt;
    std::vector<std::string> predict_wavs;
    predict->add_option("--checkpoint", predict_ckpt, "Trained checkpoint")->required();
    predict->add_option("--wav", predict_wavs, "WAV file to score (repeatable)")
        ->required()
        ->take_all();
    predict->callback([&]() { run_predict(predict_ckpt, predict_wavs); });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model over a manifest split");
    std::string eval_ckpt;
    std::string eval_manifest;
    std::string eval_out;
    std::string eval_split = "test";
    std::string eval_condition;
    int eval_threads = 0;
    evaluate->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required();
    evaluate->add_option("--manifest", eval_manifest, "CSV manifest")->required();
    evaluate->add_option("--out", eval_out, "Output directory for scatter.csv and report.txt")
        ->required();
    evaluate->add_option("--split", eval_split, "Manifest split: train, val, test, unseen, all")
        ->check(CLI::IsMember({"train", "val", "test", "unseen", "all"}));
    evaluate->add_option("--condition", eval_condition, "Condition label for the report");
    evaluate->add_option("--threads", eval_threads,
                         "Worker threads (0 = auto; DEEPGESI_THREADS caps this)");
    evaluate->callback([&]() {
        run_evaluate(eval_ckpt, eval_manifest, eval_out, eval_split, eval_condition,
                     eval_threads);
    });

    // bench
    auto* bench = app.add_subcommand("bench", "Measure per-utterance inference latency");
    std::string bench_ckpt;
    std::string bench_manifest;
    int bench_n = 500;
    int bench_warmup = 3;
    std::string bench_split = "all";
    bool bench_forward_only = false;
    std::uint64_t bench_seed = 1234;
    bench->add_option("--checkpoint", bench_ckpt, "Trained checkpoint")->required();
    bench->add_option("--manifest", bench_manifest, "CSV manifest")->required();
    bench->add_option("--n", bench_n, "Utterances to sample")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bench_warmup, "Untimed warm-up runs");
    bench->add_option("--split", bench_split, "Manifest split: train, val, test, unseen, all")
        ->check(CLI::IsMember({"train", "val", "test", "unseen", "all"}));
    bench->add_flag("--forward-only", bench_forward_only,
                    "Time only the network forward pass (exclude feature extraction)");
    bench->add_option("--seed", bench_seed, "Sampling seed");
    bench->callback([&]() {
        run_bench(bench_ckpt, bench_manifest, bench_n, bench_warmup, bench_split,
                  bench_forward_only, bench_seed);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e);  // --help and friends
        }
        app.exit(e);  // prints the usage message
        return static_cast<int>(ExitCode::usage);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::ok);
}
