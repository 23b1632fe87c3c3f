#pragma once

namespace vbnn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;      // bad data, files or arguments
inline constexpr int kExitUsage = 2;      // command-line parse errors
inline constexpr int kExitNumerical = 3;  // factorization failed, non-finite ELBO

int run_cli(int argc, const char* const* argv);

}  // namespace vbnn
