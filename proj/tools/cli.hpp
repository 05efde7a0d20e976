#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jsm::cli {

// Exit codes, stable across commands.
inline constexpr int kPass = 0;
inline constexpr int kCheckFailure = 1;
inline constexpr int kInputError = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jsm::cli
