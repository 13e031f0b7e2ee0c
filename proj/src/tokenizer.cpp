#include "tinr/tokenizer.hpp"

#include <array>
#include <cctype>

namespace tinr {

namespace {

constexpr std::array<std::string_view, 12> kControlTags = {
    "<user>",  "</user>",  "<think>",    "</think>",    "<tool_token>", "</tool_token>",
    "<tool_call>", "</tool_call>", "<obs>", "</obs>", "<response>", "</response>"};

bool word_char(unsigned char c) { return c < 0x80 && (std::isalnum(c) || c == '_'); }

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;
}

}  // namespace

std::vector<std::string> reference_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (c == '<') {
            bool matched = false;
            for (auto tag : kControlTags) {
                if (text.compare(i, tag.size(), tag) == 0) {
                    out.emplace_back(tag);
                    i += tag.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (text.compare(i, 2, "<<") == 0) {
                const auto close = text.find(">>", i + 2);
                if (close != std::string_view::npos && text.substr(i + 2, close - i - 2).find_first_of(" \t\n\r") ==
                                                           std::string_view::npos) {
                    out.emplace_back(text.substr(i, close + 2 - i));
                    i = close + 2;
                    continue;
                }
            }
        }
        if (word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && word_char(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        const std::size_t n = std::min(utf8_length(c), text.size() - i);
        out.emplace_back(text.substr(i, n));
        i += n;
    }
    return out;
}

}  // namespace tinr
