#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spirit/config.hpp"

namespace spirit::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kBackend = 3;
inline constexpr int kData = 4;

// args excludes the program name.
int run(const std::vector<std::string>& args, const StringMap& env, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace spirit::cli
