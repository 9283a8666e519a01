#pragma once

#include <iosfwd>

namespace psychfm::cli {

/// Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psychfm::cli
