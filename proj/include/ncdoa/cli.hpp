#pragma once

#include <iosfwd>

namespace ncdoa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags or config
inline constexpr int kExitRuntime = 2;  // failure while running

// Entry point of the `ncdoa` tool. Subcommands: estimate, sweep, spectra,
// selftest. Output directory: --out, else $NCDOA_OUT_DIR, else ./ncdoa_out.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace ncdoa
