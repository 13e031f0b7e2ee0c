#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace tinr {

using Json = nlohmann::json;

// Unicode NFC normalization. Invalid UTF-8 is returned unchanged.
std::string nfc(std::string_view utf8);

// Canonical form of a JSON value: strings NFC-normalized, floats with an
// exact integral value folded into integers, object keys sorted.
Json canonical_value(const Json& value);

// Compact dump of canonical_value(value). Equal strings <=> equal canonical values.
std::string canonical_dump(const Json& value);

// Structural comparison for parameter values: numbers by value within a
// relative tolerance of 1e-9, strings byte-wise after NFC, containers
// element-wise.
bool values_equal(const Json& a, const Json& b);

// Compact dump with non-ASCII kept verbatim; invalid UTF-8 is replaced.
std::string compact_dump(const Json& value);

}  // namespace tinr
