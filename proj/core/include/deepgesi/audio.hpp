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

#include <string>
#include <vector>

namespace deepgesi {

// Mono floating-point audio with its sample rate. After the ingestion
// pipeline (load + resample to the target rate) completes, downstream code
// may assume sample_rate_hz == 16000.
struct AudioBuffer {
    std::vector<float> samples;  // amplitudes in [-1, 1]
    int sample_rate_hz = 0;
    std::string source_path;
};

// Reads a RIFF/WAVE file. Supported encodings: PCM-16, PCM-24, and IEEE
// float-32. Multi-channel input is averaged to mono. PCM samples are scaled
// by 1/2^(bits-1) (asymmetric convention: -32768 -> -1.0 for PCM-16).
// Throws DataError for unreadable files, unsupported encodings, or
// zero-length audio.
auto load_wav(const std::string& path) -> AudioBuffer;

// Writes a mono PCM-16 WAV file. Samples are clipped to [-1, 1] and scaled
// by 32767. Throws DataError if the file cannot be written.
void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                     int sample_rate_hz);

// Writes a mono IEEE float-32 WAV file (used for lossless round-trips in
// tests and tooling). Throws DataError if the file cannot be written.
void write_wav_float32(const std::string& path, const std::vector<float>& samples,
                       int sample_rate_hz);

// Resamples to target_hz with a windowed-sinc polyphase filter (Kaiser
// window, beta = 8.6, 64 taps per phase). Pass-through (bit-identical) when
// the rates already match. Output length is round(n * target / source).
auto resample(const AudioBuffer& buf, int target_hz) -> AudioBuffer;

// Scales the buffer to unit RMS (opt-in; not part of the default pipeline).
auto rms_normalize(const AudioBuffer& buf) -> AudioBuffer;

}  // namespace deepgesi
