/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OODKIT_TOOLS_CLI_HPP_
#define OODKIT_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace oodkit::cli {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Exit codes besides the library's kExitCodeBase + ErrorCode values.
inline constexpr int kExitOk = 0;
inline constexpr int kExitTheoremFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

// Runs one command line (args excludes the program name). Normal output goes
// to `out`, diagnostics to `err`. Returns the process exit code.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Checks that `record` has the RunRecord shape written to journals. Returns
// an empty string when valid, otherwise a description of the first problem.
std::string ValidateRunRecord(const nlohmann::json& record);

}  // namespace oodkit::cli

#endif  // OODKIT_TOOLS_CLI_HPP_
