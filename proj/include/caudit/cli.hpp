#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace caudit {

inline constexpr std::uint64_t kDefaultSeed = 1729;

enum ExitCode : int { kExitOk = 0, kExitFindings = 1, kExitError = 2 };

// args excludes the program name. Usage and errors go to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace caudit
