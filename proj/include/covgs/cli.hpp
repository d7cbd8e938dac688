// Copyright 2026 The covgs Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: demo-gen, train, select-eval and servo.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace covgs {

/// Environment variable that overrides the default output directory.
inline constexpr const char* kOutDirEnv = "COVGS_OUT_DIR";

/// Runs one command; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace covgs
