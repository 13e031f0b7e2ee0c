#pragma once

#include <iosfwd>

namespace tinr {

// Exit codes: 0 success, 1 validation failure, 2 I/O failure. Diagnostics go
// to `err` as one JSON object per line.
int cli(int argc, const char* const argv[], std::ostream& out, std::ostream& err);
int cli(int argc, const char* const argv[]);

}  // namespace tinr
