// SPDX-License-Identifier: MIT
#pragma once

namespace capeq::cli {

enum ExitCode : int { kPass = 0, kCheckFailure = 1, kUsageError = 2 };

/// Entry point of the `capeq` command-line tool. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace capeq::cli
