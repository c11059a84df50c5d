#pragma once

#include <iosfwd>

namespace shiftuq::cli {

/// Exit codes: 0 success, 1 invalid input (flags, config, missing files),
/// 2 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shiftuq::cli
