#pragma once

#include <string_view>

namespace tinr {

inline constexpr int kSystemPromptVersion = 1;

// Fixed instruction text placed before the dialogue. Carries no tool
// documentation, so its length does not depend on the toolset.
inline constexpr std::string_view kSystemPrompt =
    "You answer the request written between <user> and </user> using the tools you have learned.\n"
    "Reason inside <think> and </think>; tool tokens from your vocabulary may appear in the reasoning.\n"
    "When tools are required, list every tool token you need inside <tool_token> and </tool_token>, "
    "one per line. Documentation for those tokens will then be returned inside <obs>.\n"
    "Then write the calls inside <tool_call> and </tool_call>, one JSON object per line:\n"
    "{\"token\": \"<tool token>\", \"parameters\": {\"<name>\": <value>}}\n"
    "Use an empty object for \"parameters\" when a tool takes none.\n"
    "Tool results arrive inside <obs> and </obs>. When no further tool is needed, answer inside "
    "<response> and </response>.\n"
    "Earlier turns of the dialogue follow, with their calls, results and answers.";

}  // namespace tinr
