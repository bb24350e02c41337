// Copyright 2026 The FinRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `finrag` command line. Configuration is a JSON tree resolved as
// built-in defaults, then the --config file, then flags.

#ifndef FINRAG_CLI_HPP_
#define FINRAG_CLI_HPP_

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/error.hpp"

namespace finrag {

enum ExitCode : int {
  kExitOk = 0,
  kExitDataError = 1,
  kExitUsage = 2,
  kExitBackend = 3,
};

/// Exit code for a failure with `code`.
int ExitCodeFor(ErrorCode code);

/// Built-in defaults as pretty-printed JSON.
std::string DefaultConfigJson();

/// Overlays `overlay` (a JSON object) onto `base`. Keys missing from the
/// defaults and type mismatches throw Error(kConfigError).
std::string MergeConfigJson(std::string_view base, std::string_view overlay);

/// SHA-256 of the canonical resolved config, ignoring out_dir and verbose.
std::string ConfigFingerprint(std::string_view resolved);

/// Runs the command line `args` (without the program name).
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace finrag

#endif  // FINRAG_CLI_HPP_
