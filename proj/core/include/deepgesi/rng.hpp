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
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace deepgesi {

// Mixes a master seed with a stream index into an independent sub-seed.
// Used to derive per-utterance and per-epoch seeds so that work can be
// reordered or resumed without replaying a single global random stream.
inline auto splitmix64(std::uint64_t seed, std::uint64_t stream) -> std::uint64_t {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic random source. Distribution sampling is implemented here
// (rather than with std::normal_distribution, whose output sequence is
// implementation-defined) so that streams are reproducible across standard
// libraries and serializable for checkpoint resume.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform double in [0, 1).
    auto uniform() -> double {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    auto uniform(double lo, double hi) -> double { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one fresh pair per two draws.
    auto normal() -> double {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard log(0); the shift keeps u1 in (0, 1].
        u1 = 1.0 - u1;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    auto normal(double mean, double stddev) -> double { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    auto index(std::uint64_t n) -> std::uint64_t {
        // Rejection sampling for an unbiased result.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
        std::uint64_t x = engine_();
        while (x >= limit) { x = engine_(); }
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[static_cast<std::size_t>(index(i))]);
        }
    }

    // Engine state as text, for checkpoint serialization. The Box-Muller
    // spare is folded in so resume continues the exact sample stream.
    [[nodiscard]] auto state() const -> std::string {
        std::ostringstream out;
        out << engine_ << ' ' << (have_spare_ ? 1 : 0) << ' ';
        out.precision(17);
        out << spare_;
        return out.str();
    }

    void restore(const std::string& text) {
        std::istringstream in(text);
        int spare_flag = 0;
        in >> engine_ >> spare_flag >> spare_;
        have_spare_ = spare_flag != 0;
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace deepgesi
