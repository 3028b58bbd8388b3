#pragma once

#include <iosfwd>

namespace wattbench {

/// Full command-line entry point, reusable in-process for tests.  Writes
/// results to `out` and diagnostics to `err`; returns the process exit code
/// (0 ok, 2 spec/parse error, 3 infeasible recommendation, 4 empty input,
/// 1 anything else).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "120ms" -> 0.12, "2.5s" -> 2.5, bare numbers are seconds already.
double parse_duration_s(const std::string& text);

}  // namespace wattbench
