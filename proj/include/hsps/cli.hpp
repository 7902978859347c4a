#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hsps::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 1;
inline constexpr int exit_model = 2;

// Runs one subcommand. `args` excludes the program name. Results go to
// --out when given, else to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace hsps::cli
