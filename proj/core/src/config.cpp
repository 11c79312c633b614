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

#include "deepgesi/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "deepgesi/errors.hpp"

namespace deepgesi {

void TrainConfig::validate() const {
    if (lr <= 0.0) { throw UsageError("train: lr must be positive"); }
    if (batch_size < 1) { throw UsageError("train: batch_size must be >= 1"); }
    if (alpha < 0.0) { throw UsageError("train: alpha must be >= 0"); }
    if (max_epochs < 1) { throw UsageError("train: max_epochs must be >= 1"); }
    if (early_stop_patience < 0) { throw UsageError("train: early_stop_patience must be >= 0"); }
    if (grad_clip_norm < 0.0) { throw UsageError("train: grad_clip_norm must be >= 0"); }
    if (max_steps < 0) { throw UsageError("train: max_steps must be >= 0"); }
}

auto RunConfig::sinc_geometry() const -> SincGeometry {
    SincGeometry geom;
    geom.num_filters = lfb_filters;
    geom.kernel_length = lfb_kernel;
    geom.frame_win = stft.win_length;
    geom.frame_hop = stft.hop_length;
    geom.sample_rate_hz = target_sr;
    return geom;
}

namespace {

template <typename T>
auto format_number(T value) -> std::string {
    std::ostringstream out;
    out.precision(17);
    out << value;
    return out.str();
}

auto parse_int(const std::string& key, const std::string& value) -> long {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) { throw std::invalid_argument(value); }
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

auto parse_double(const std::string& key, const std::string& value) -> double {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) { throw std::invalid_argument(value); }
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

auto parse_bool(const std::string& key, const std::string& value) -> bool {
    if (value == "true" || value == "1") { return true; }
    if (value == "false" || value == "0") { return false; }
    throw UsageError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

auto RunConfig::to_ini() const -> std::string {
    std::ostringstream out;
    out << "# resolved run configuration\n";
    out << "win_length=" << stft.win_length << '\n';
    out << "hop_length=" << stft.hop_length << '\n';
    out << "fft_size=" << stft.fft_size << '\n';
    out << "window=" << to_string(stft.window) << '\n';
    out << "lfb_filters=" << lfb_filters << '\n';
    out << "lfb_kernel=" << lfb_kernel << '\n';
    out << "d_model=" << model.d_model << '\n';
    out << "n_heads=" << model.n_heads << '\n';
    out << "n_blocks=" << model.n_blocks << '\n';
    out << "maxout_pieces=" << model.maxout_pieces << '\n';
    out << "conv_channels=" << model.conv_channels << '\n';
    out << "conv_kernel=" << model.conv_kernel << '\n';
    out << "conv_stride=" << model.conv_stride << '\n';
    out << "activation=" << to_string(model.activation) << '\n';
    out << "positional_encoding=" << to_string(model.positional_encoding) << '\n';
    out << "max_learned_len=" << model.max_learned_len << '\n';
    out << "lr=" << format_number(train.lr) << '\n';
    out << "batch_size=" << train.batch_size << '\n';
    out << "alpha=" << format_number(train.alpha) << '\n';
    out << "max_epochs=" << train.max_epochs << '\n';
    out << "early_stop_patience=" << train.early_stop_patience << '\n';
    out << "seed=" << train.seed << '\n';
    out << "adam_beta1=" << format_number(train.adam_beta1) << '\n';
    out << "adam_beta2=" << format_number(train.adam_beta2) << '\n';
    out << "adam_eps=" << format_number(train.adam_eps) << '\n';
    out << "grad_clip_norm=" << format_number(train.grad_clip_norm) << '\n';
    out << "max_steps=" << train.max_steps << '\n';
    out << "target_train_loss=" << format_number(train.target_train_loss) << '\n';
    out << "target_sr=" << target_sr << '\n';
    out << "rms_normalize=" << (rms_normalize ? "true" : "false") << '\n';
    return out.str();
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "win_length") {
        stft.win_length = static_cast<int>(parse_int(key, value));
    } else if (key == "hop_length") {
        stft.hop_length = static_cast<int>(parse_int(key, value));
    } else if (key == "fft_size") {
        stft.fft_size = static_cast<int>(parse_int(key, value));
    } else if (key == "window") {
        stft.window = window_kind_from_string(value);
    } else if (key == "lfb_filters") {
        lfb_filters = static_cast<int>(parse_int(key, value));
    } else if (key == "lfb_kernel") {
        lfb_kernel = static_cast<int>(parse_int(key, value));
    } else if (key == "d_model") {
        model.d_model = static_cast<int>(parse_int(key, value));
    } else if (key == "n_heads") {
        model.n_heads = static_cast<int>(parse_int(key, value));
    } else if (key == "n_blocks") {
        model.n_blocks = static_cast<int>(parse_int(key, value));
    } else if (key == "maxout_pieces") {
        model.maxout_pieces = static_cast<int>(parse_int(key, value));
    } else if (key == "conv_channels") {
        model.conv_channels = static_cast<int>(parse_int(key, value));
    } else if (key == "conv_kernel") {
        model.conv_kernel = static_cast<int>(parse_int(key, value));
    } else if (key == "conv_stride") {
        model.conv_stride = static_cast<int>(parse_int(key, value));
    } else if (key == "activation") {
        model.activation = activation_from_string(value);
    } else if (key == "positional_encoding") {
        model.positional_encoding = positional_encoding_from_string(value);
    } else if (key == "max_learned_len") {
        model.max_learned_len = static_cast<int>(parse_int(key, value));
    } else if (key == "lr") {
        train.lr = parse_double(key, value);
    } else if (key == "batch_size") {
        train.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "alpha") {
        train.alpha = parse_double(key, value);
    } else if (key == "max_epochs") {
        train.max_epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "early_stop_patience") {
        train.early_stop_patience = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
        train.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "adam_beta1") {
        train.adam_beta1 = parse_double(key, value);
    } else if (key == "adam_beta2") {
        train.adam_beta2 = parse_double(key, value);
    } else if (key == "adam_eps") {
        train.adam_eps = parse_double(key, value);
    } else if (key == "grad_clip_norm") {
        train.grad_clip_norm = parse_double(key, value);
    } else if (key == "max_steps") {
        train.max_steps = parse_int(key, value);
    } else if (key == "target_train_loss") {
        train.target_train_loss = parse_double(key, value);
    } else if (key == "target_sr") {
        target_sr = static_cast<int>(parse_int(key, value));
    } else if (key == "rms_normalize") {
        rms_normalize = parse_bool(key, value);
    } else {
        throw UsageError("config: unknown key '" + key + "'");
    }
}

void RunConfig::apply_ini(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) { line.pop_back(); }
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) { continue; }
        if (line[start] == '#' || line[start] == ';') { continue; }
        const std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) {
            throw UsageError("config " + origin + " line " + std::to_string(row) +
                             ": expected key=value, got '" + line + "'");
        }
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') { key.pop_back(); }
        std::size_t value_start = value.find_first_not_of(" \t");
        value = value_start == std::string::npos ? "" : value.substr(value_start);
        try {
            apply(key, value);
        } catch (const UsageError& e) {
            throw UsageError(std::string(e.what()) + " (at " + origin + " line " +
                             std::to_string(row) + ")");
        }
    }
}

void RunConfig::validate() const {
    stft.validate();
    model.validate();
    train.validate();
    sinc_geometry().validate();
    if (target_sr <= 0) { throw UsageError("config: target_sr must be positive"); }
    const int feat_bins = stft.fft_size / 2 + 1;
    if (feat_bins <= 0 || lfb_filters <= 0) {
        throw UsageError("config: feature dimensions must be positive");
    }
}

auto load_config_file(const std::string& path, RunConfig base) -> RunConfig {
    base.apply_ini(read_text_file(path), path);
    return base;
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) { throw DataError("cannot open for writing: " + tmp); }
        out << text;
        if (!out) { throw DataError("short write: " + tmp); }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) { throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message()); }
}

auto read_text_file(const std::string& path) -> std::string {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw DataError("cannot open file: " + path); }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace deepgesi
