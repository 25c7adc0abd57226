#pragma once

#include <iosfwd>

namespace nkb::cli {

/// Exit codes: 0 success, 2 invalid usage or input, 3 numerical abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the `nkbandit` command line; `out` receives summaries and
/// help text, `err` receives diagnostics.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nkb::cli
