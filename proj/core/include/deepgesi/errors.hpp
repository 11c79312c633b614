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

#include <stdexcept>
#include <string>

namespace deepgesi {

// Process exit codes shared by the CLI and the error hierarchy.
// 0 = success, 1 = usage error, 2 = data error, 3 = numeric failure.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    numeric = 3,
};

class Error : public std::runtime_error {
  public:
    Error(ExitCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] auto exit_code() const -> int { return static_cast<int>(code_); }

  private:
    ExitCode code_;
};

// Bad flags, malformed config keys/values, invalid argument combinations.
class UsageError : public Error {
  public:
    explicit UsageError(const std::string& message) : Error(ExitCode::usage, message) {}
};

// Unreadable/malformed files, bad manifests, unsupported audio encodings.
class DataError : public Error {
  public:
    explicit DataError(const std::string& message) : Error(ExitCode::data, message) {}
};

// Non-finite gradients, divergence, undefined statistics (constant vectors).
class NumericError : public Error {
  public:
    explicit NumericError(const std::string& message) : Error(ExitCode::numeric, message) {}
};

}  // namespace deepgesi
