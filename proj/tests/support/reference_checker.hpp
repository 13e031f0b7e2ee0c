#pragma once

#include <string_view>

namespace tinr::testing {

// A second, separately written implementation of the trajectory format
// predicate: regex tag scanning, a regular language over block letters and
// a SAX pass for JSON payloads. Shares no code with the library parser.
bool reference_check_format(std::string_view text);

}  // namespace tinr::testing
