#pragma once

namespace qarch::cli {

inline constexpr const char* kVersion = "0.1.0";

int run(int argc, const char* const* argv);

}  // namespace qarch::cli
