#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

namespace kdqa {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Runs one `kdqa` invocation. `args` excludes the program name.
/// Returns 0 on success, 2 on a usage error and 1 on data or config errors;
/// failures print a single "error: <kind>: <message>" line to `err`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace kdqa
