#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flipscale::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // I/O problems, replay mismatch
inline constexpr int kExitValidation = 2;  // bad flags, config or parameters
inline constexpr int kExitTolerance = 3;   // a numerical iteration hit its cap
inline constexpr int kExitNoFlip = 4;      // constant or degenerate function

// Environment variable that overrides the configured base seed (an explicit
// --seed flag still wins).
inline constexpr const char* kSeedEnv = "FLIPSCALE_SEED";

// Runs the tool on args (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flipscale::cli
