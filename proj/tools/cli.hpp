#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace teachlab::cli {

/// Runs one teachlab command line. Returns the process exit code: 0 on
/// success, 1 when the command fails, 2 for usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace teachlab::cli
