#pragma once

#include "tinr/json_value.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tinr {

// Throw IoError on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

struct JsonLine {
    std::size_t line_number;  // 1-based
    Json value;
};

// Blank lines are skipped. Throws ValidationError("MalformedJsonl") on bad JSON.
std::vector<JsonLine> parse_jsonl(const std::string& contents);
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<Json>& values);

}  // namespace tinr
