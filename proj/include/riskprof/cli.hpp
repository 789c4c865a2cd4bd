#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace riskprof {

/// Runs one riskprof subcommand. `args` excludes the program name. Writes the
/// JSON report to `out`; errors go to `err` as JSON. Returns 0 on success, 2
/// on invalid input and 1 on internal failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace riskprof
