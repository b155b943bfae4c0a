#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace selfsim::cli {

// Exit codes besides the simulate outcomes (0 / 2 / 3).
inline constexpr int kUsage = 64;
inline constexpr int kDomain = 65;
inline constexpr int kConfiguration = 66;
inline constexpr int kRange = 67;
inline constexpr int kSolver = 70;
inline constexpr int kIo = 74;

// Runs one subcommand; the manifest JSON goes to out, diagnostics to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace selfsim::cli
