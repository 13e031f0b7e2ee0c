#include "tinr/io.hpp"

#include "tinr/error.hpp"

#include <fstream>
#include <sstream>

namespace tinr {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<JsonLine> parse_jsonl(const std::string& contents) {
    std::vector<JsonLine> out;
    std::istringstream in(contents);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back({number, Json::parse(line)});
        } catch (const Json::parse_error& e) {
            throw ValidationError("MalformedJsonl", "line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

std::string to_jsonl(const std::vector<Json>& values) {
    std::string out;
    for (const auto& v : values) out += compact_dump(v) + "\n";
    return out;
}

}  // namespace tinr
