#pragma once

namespace ccity::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

// Entry point of the ccity tool. Diagnostics go to stderr.
int run(int argc, const char* const* argv);

}  // namespace ccity::cli
