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

#include "deepgesi/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "deepgesi/errors.hpp"

namespace deepgesi {
namespace {

constexpr char kMagic[4] = {'D', 'G', 'C', 'P'};

// All multi-byte fields are serialized little-endian regardless of host
// byte order.
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_bytes(std::string& out, const std::string& bytes) {
    out.append(bytes.data(), bytes.size());
}

void put_matrix(std::string& out, const MatF& m) {
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_f32(out, m(r, c));
        }
    }
}

class Reader {
  public:
    Reader(std::string data, std::string path)
        : data_(std::move(data)), path_(std::move(path)) {}

    auto u8() -> std::uint8_t {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }

    auto u32() -> std::uint32_t {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    auto u64() -> std::uint64_t {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    auto f32() -> float { return std::bit_cast<float>(u32()); }

    auto f64() -> double { return std::bit_cast<double>(u64()); }

    auto bytes(std::size_t n) -> std::string {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    auto matrix() -> MatF {
        const auto rows = u64();
        const auto cols = u64();
        constexpr std::uint64_t kMaxDim = 1ULL << 32;
        if (rows > kMaxDim || cols > kMaxDim || (rows != 0 && cols > kMaxDim / rows)) {
            throw DataError("checkpoint '" + path_ + "' is corrupt: implausible tensor shape");
        }
        MatF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = f32();
            }
        }
        return m;
    }

    auto exhausted() const -> bool { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw DataError("checkpoint '" + path_ + "' is truncated or corrupt");
        }
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    if (ckpt.has_adam &&
        (ckpt.adam_m.size() != ckpt.tensors.size() || ckpt.adam_v.size() != ckpt.tensors.size())) {
        throw DataError("checkpoint: optimizer state does not match parameter list");
    }

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, Checkpoint::kVersion);

    const std::string config_text = ckpt.config.to_ini();
    put_u64(out, config_text.size());
    put_bytes(out, config_text);

    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        put_bytes(out, name);
        put_matrix(out, tensor);
    }

    out.push_back(ckpt.has_adam ? '\1' : '\0');
    if (ckpt.has_adam) {
        put_u64(out, ckpt.adam_step);
        for (const auto& m : ckpt.adam_m) {
            put_matrix(out, m);
        }
        for (const auto& v : ckpt.adam_v) {
            put_matrix(out, v);
        }
    }

    put_u32(out, ckpt.epochs_completed);
    put_u32(out, ckpt.bad_epochs);
    put_f64(out, ckpt.best_val_loss);
    put_u64(out, ckpt.global_step);
    put_u32(out, static_cast<std::uint32_t>(ckpt.rng_state.size()));
    put_bytes(out, ckpt.rng_state);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw DataError("cannot open '" + tmp + "' for writing");
        }
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) {
            throw DataError("failed to write checkpoint '" + tmp + "'");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DataError("failed to move checkpoint into place at '" + path + "'");
    }
}

auto load_checkpoint(const std::string& path) -> Checkpoint {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot open checkpoint '" + path + "'");
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    Reader r(buf.str(), path);

    const std::string magic = r.bytes(4);
    if (magic != std::string(kMagic, sizeof(kMagic))) {
        throw DataError("'" + path + "' is not a checkpoint file (bad magic)");
    }
    const auto version = r.u32();
    if (version != Checkpoint::kVersion) {
        throw DataError("checkpoint '" + path + "' has unsupported version " +
                        std::to_string(version));
    }

    Checkpoint ckpt;
    const auto config_len = r.u64();
    const std::string config_text = r.bytes(config_len);
    ckpt.config.apply_ini(config_text, path + " (embedded config)");
    ckpt.config.validate();

    const auto n_tensors = r.u32();
    ckpt.tensors.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = r.u32();
        std::string name = r.bytes(name_len);
        MatF tensor = r.matrix();
        ckpt.tensors.emplace_back(std::move(name), std::move(tensor));
    }

    ckpt.has_adam = r.u8() != 0;
    if (ckpt.has_adam) {
        ckpt.adam_step = r.u64();
        ckpt.adam_m.reserve(n_tensors);
        ckpt.adam_v.reserve(n_tensors);
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            ckpt.adam_m.push_back(r.matrix());
        }
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            ckpt.adam_v.push_back(r.matrix());
        }
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            if (ckpt.adam_m[i].rows() != ckpt.tensors[i].second.rows() ||
                ckpt.adam_m[i].cols() != ckpt.tensors[i].second.cols() ||
                ckpt.adam_v[i].rows() != ckpt.tensors[i].second.rows() ||
                ckpt.adam_v[i].cols() != ckpt.tensors[i].second.cols()) {
                throw DataError("checkpoint '" + path +
                                "' is corrupt: optimizer state shape mismatch for '" +
                                ckpt.tensors[i].first + "'");
            }
        }
    }

    ckpt.epochs_completed = r.u32();
    ckpt.bad_epochs = r.u32();
    ckpt.best_val_loss = r.f64();
    ckpt.global_step = r.u64();
    const auto rng_len = r.u32();
    ckpt.rng_state = r.bytes(rng_len);

    if (!r.exhausted()) {
        throw DataError("checkpoint '" + path + "' has trailing bytes");
    }
    return ckpt;
}

void apply_checkpoint(Model<float>& model, const Checkpoint& ckpt) {
    auto& items = model.params().items();
    if (items.size() != ckpt.tensors.size()) {
        throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                        " tensors but the model has " + std::to_string(items.size()) +
                        " parameters");
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& [name, tensor] = ckpt.tensors[i];
        if (name != items[i].first) {
            throw DataError("checkpoint tensor '" + name + "' does not match parameter '" +
                            items[i].first + "' (order mismatch)");
        }
        auto& value = items[i].second.value();
        if (tensor.rows() != value.rows() || tensor.cols() != value.cols()) {
            throw DataError("checkpoint tensor '" + name + "' has shape " +
                            std::to_string(tensor.rows()) + "x" + std::to_string(tensor.cols()) +
                            " but the model expects " + std::to_string(value.rows()) + "x" +
                            std::to_string(value.cols()));
        }
        value = tensor;
    }
}

}  // namespace deepgesi
