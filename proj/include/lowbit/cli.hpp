#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lowbit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailure = 3;

/// Environment variable naming the default report directory when --out is absent.
inline constexpr const char* kOutputDirEnv = "LOWBIT_OUTPUT_DIR";

/// Runs the command line `args` (without the program name). The report goes
/// to `out`, diagnostics to `err`. Returns 0 on success, 2 on a usage error
/// and 3 when validation or an acceptance criterion fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lowbit
