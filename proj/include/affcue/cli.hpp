#pragma once

#include <iosfwd>

namespace affcue {

/// Entry point of the `affcue` tool. Returns 0 on success, 1 on usage
/// errors, 2 on runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace affcue
