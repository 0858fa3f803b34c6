#pragma once

namespace pnl {

// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

int run_cli(int argc, char** argv);

}  // namespace pnl
