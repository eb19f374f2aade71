// Command-line front end. Subcommands are connected by files only:
//   phantom -> preprocess -> build-dataset -> (trainer) -> evaluate
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cmr::cli {

enum ExitCode { kOk = 0, kUsageError = 1, kDataError = 2 };

inline constexpr const char *kToolName = "cmr-forge";
inline constexpr const char *kThreadsEnv = "CMR_FORGE_THREADS";

std::string version();

/// Runs one invocation; `args` excludes the program name. Never throws.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// --threads if positive, else CMR_FORGE_THREADS, else the logical CPU count.
/// Throws std::invalid_argument for a malformed environment value.
unsigned resolve_threads(unsigned flag);

} // namespace cmr::cli
