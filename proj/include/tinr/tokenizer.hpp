#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tinr {

// Reference tokenizer used by the scripted policy and test fixtures:
// recognized control tags and <<...>> tool tokens are single tokens, runs of
// [A-Za-z0-9_] are single tokens, every other non-whitespace code point is
// one token, whitespace is dropped. Real policies report their own
// tokenization via logprob list lengths.
std::vector<std::string> reference_tokenize(std::string_view text);

}  // namespace tinr
