#pragma once

#include <ostream>
#include <span>
#include <string>

namespace quill::cli {

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on a usage error (help text goes to `err`) and 2 when the
// data or a file is invalid.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace quill::cli
