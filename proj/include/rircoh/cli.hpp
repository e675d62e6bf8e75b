#pragma once

#include "rircoh/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rircoh::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInput = 2, kExitAnalysis = 3 };

// Runs the command line (args excludes the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Shortest decimal that reads back to the same double; "nan" for NaN and
// "inf"/"-inf" for infinities.
std::string format_number(double value);
std::string format_gamma(const std::optional<double>& value);

// Band list syntax: "default" (the 19 standard bands), "broadband", or a
// comma-separated list whose items are "broadband", a centre in Hz (1 kHz
// wide) or "centre:bandwidth". Throws ConfigError.
std::vector<BandLabel> parse_bands(std::string_view spec);

// File-name-safe form of an id: characters outside [A-Za-z0-9._-] become '_'.
std::string file_token(std::string_view id);

}  // namespace rircoh::cli
