/*
 * Copyright 2026 The PRISM Shape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

namespace prism::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidationFailed = 2, kRuntimeError = 3 };

/// Runs one subcommand. args[0] is the program name.
int run(std::vector<std::string> args);

}  // namespace prism::cli
