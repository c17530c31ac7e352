// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace dlv {

enum ExitCode : int { kExitSafe = 0, kExitAdversarial = 1, kExitInconclusive = 2, kExitUsage = 3 };

int cli_main(int argc, char** argv);
/// `args` excludes the program name.
int cli_main(const std::vector<std::string>& args);

} // namespace dlv
