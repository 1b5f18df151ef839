#pragma once

#include <iosfwd>

namespace earlycorr::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Parses argv, runs one verb and returns the process exit status:
/// 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace earlycorr::cli
