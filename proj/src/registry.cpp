#include "tinr/registry.hpp"

#include "tinr/text_index.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace tinr {

namespace {

ValidationError invalid(const std::string& kind, const std::string& what) { return ValidationError(kind, what); }

}  // namespace

std::string_view to_string(ValueType type) {
    switch (type) {
        case ValueType::String: return "string";
        case ValueType::Integer: return "integer";
        case ValueType::Number: return "number";
        case ValueType::Boolean: return "boolean";
        case ValueType::Array: return "array";
        case ValueType::Object: return "object";
    }
    return "string";
}

ValueType value_type_from_string(std::string_view name) {
    if (name == "string") return ValueType::String;
    if (name == "integer" || name == "int") return ValueType::Integer;
    if (name == "number" || name == "float") return ValueType::Number;
    if (name == "boolean" || name == "bool") return ValueType::Boolean;
    if (name == "array") return ValueType::Array;
    if (name == "object") return ValueType::Object;
    throw invalid("InvalidToolDoc", "unknown parameter type '" + std::string(name) + "'");
}

bool json_matches(const Json& value, ValueType type) {
    switch (type) {
        case ValueType::String: return value.is_string();
        case ValueType::Integer:
            if (value.is_number_integer()) return true;
            return value.is_number_float() && std::isfinite(value.get<double>()) &&
                   value.get<double>() == std::floor(value.get<double>());
        case ValueType::Number: return value.is_number();
        case ValueType::Boolean: return value.is_boolean();
        case ValueType::Array: return value.is_array();
        case ValueType::Object: return value.is_object();
    }
    return false;
}

std::string_view to_string(IndexStrategy strategy) {
    switch (strategy) {
        case IndexStrategy::Atomic: return "atomic";
        case IndexStrategy::Semantic: return "semantic";
        case IndexStrategy::Numeric: return "numeric";
        case IndexStrategy::Hierarchical: return "hierarchical";
    }
    return "atomic";
}

IndexStrategy strategy_from_string(std::string_view name) {
    if (name == "atomic") return IndexStrategy::Atomic;
    if (name == "semantic") return IndexStrategy::Semantic;
    if (name == "numeric") return IndexStrategy::Numeric;
    if (name == "hierarchical") return IndexStrategy::Hierarchical;
    throw invalid("InvalidStrategy", "unknown indexing strategy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ToolDoc

void ToolDoc::normalize() {
    if (name.empty()) throw invalid("InvalidToolDoc", "tool name is empty");
    std::sort(parameters.begin(), parameters.end(),
              [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        const auto& p = parameters[i];
        if (p.name.empty()) throw invalid("InvalidToolDoc", "tool '" + name + "' has a parameter with an empty name");
        if (i > 0 && parameters[i - 1].name == p.name) {
            throw invalid("InvalidToolDoc", "tool '" + name + "' repeats parameter '" + p.name + "'");
        }
        if (p.default_value && !json_matches(*p.default_value, p.value_type)) {
            throw invalid("InvalidToolDoc", "tool '" + name + "' parameter '" + p.name + "' default does not match type " +
                                                std::string(to_string(p.value_type)));
        }
    }
}

Json ToolDoc::to_json() const {
    Json params = Json::array();
    std::vector<const ParamSpec*> sorted;
    for (const auto& p : parameters) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const ParamSpec* a, const ParamSpec* b) { return a->name < b->name; });
    for (const ParamSpec* p : sorted) {
        Json entry = {{"name", p->name},
                      {"type", std::string(to_string(p->value_type))},
                      {"required", p->required},
                      {"description", p->description}};
        if (p->default_value) entry["default"] = *p->default_value;
        params.push_back(std::move(entry));
    }
    return Json{{"name", name}, {"description", description}, {"parameters", std::move(params)}};
}

ToolDoc ToolDoc::from_json(const Json& json) {
    if (!json.is_object()) throw invalid("InvalidToolDoc", "tool documentation must be a JSON object");
    ToolDoc doc;
    try {
        doc.name = json.at("name").get<std::string>();
        doc.description = json.value("description", std::string{});
        const Json params = json.value("parameters", Json::array());
        if (params.is_array()) {
            for (const auto& p : params) {
                ParamSpec spec;
                spec.name = p.at("name").get<std::string>();
                spec.value_type = value_type_from_string(p.value("type", std::string("string")));
                spec.required = p.value("required", false);
                spec.description = p.value("description", std::string{});
                if (p.contains("default")) spec.default_value = p.at("default");
                doc.parameters.push_back(std::move(spec));
            }
        } else if (params.is_object()) {
            std::set<std::string> required;
            if (params.contains("required")) {
                for (const auto& r : params.at("required")) required.insert(r.get<std::string>());
            }
            const Json properties = params.value("properties", Json::object());
            for (const auto& [key, p] : properties.items()) {
                ParamSpec spec;
                spec.name = key;
                spec.value_type = value_type_from_string(p.value("type", std::string("string")));
                spec.required = required.count(key) > 0;
                spec.description = p.value("description", std::string{});
                if (p.contains("default")) spec.default_value = p.at("default");
                doc.parameters.push_back(std::move(spec));
            }
        } else {
            throw invalid("InvalidToolDoc", "'parameters' must be a list or an object");
        }
    } catch (const Json::exception& e) {
        throw invalid("InvalidToolDoc", std::string("malformed tool documentation: ") + e.what());
    }
    doc.normalize();
    return doc;
}

std::string ToolDoc::canonical() const { return compact_dump(to_json()); }

std::string ToolDoc::search_text() const {
    std::string text = name + "\n" + description;
    for (const auto& p : parameters) text += "\n" + p.name + " " + p.description;
    return text;
}

// ---------------------------------------------------------------------------
// Identifier assignment

std::string sanitize_tool_name(std::string_view name) {
    std::string out;
    auto push = [&out](char c) {
        if (c == '_' && (out.empty() || out.back() == '_')) {
            if (out.empty()) out.push_back('_');
            return;
        }
        out.push_back(c);
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        const auto c = static_cast<unsigned char>(name[i]);
        if (c < 0x80 && std::isalnum(c)) {
            if (std::isupper(c) && i > 0) {
                const auto prev = static_cast<unsigned char>(name[i - 1]);
                if (prev < 0x80 && (std::islower(prev) || std::isdigit(prev))) push('_');
            }
            push(static_cast<char>(std::tolower(c)));
        } else {
            push('_');
        }
    }
    return out;
}

namespace {

std::vector<std::string> suffix_collisions(std::vector<std::string> bases) {
    std::unordered_map<std::string, std::size_t> seen;
    std::set<std::string> taken(bases.begin(), bases.end());
    for (auto& base : bases) {
        std::size_t& count = seen[base];
        ++count;
        if (count == 1) continue;
        std::string candidate = base + "#" + std::to_string(count);
        while (taken.count(candidate) > 0) candidate = base + "#" + std::to_string(++count);
        taken.insert(candidate);
        base = std::move(candidate);
    }
    return bases;
}

std::vector<std::string> atomic_surfaces(const std::vector<ToolDoc>& tools) {
    std::vector<std::string> bases;
    bases.reserve(tools.size());
    for (const auto& t : tools) bases.push_back(sanitize_tool_name(t.name));
    auto unique = suffix_collisions(std::move(bases));
    for (auto& s : unique) s = "<<" + s + ">>";
    return unique;
}

std::vector<std::string> numeric_surfaces(std::size_t n) {
    const std::size_t width = std::to_string(n).size();
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string digits = std::to_string(i);
        out.push_back(std::string(width - digits.size(), '0') + digits);
    }
    return out;
}

void cluster_recursive(const std::vector<TermVector>& vectors, std::vector<std::size_t> members,
                       const std::string& prefix, std::size_t branching, std::vector<std::string>& paths) {
    auto join = [&prefix](std::size_t component) {
        return prefix.empty() ? std::to_string(component) : prefix + "-" + std::to_string(component);
    };
    if (members.size() <= branching) {
        for (std::size_t i = 0; i < members.size(); ++i) paths[members[i]] = join(i);
        return;
    }

    // Farthest-point seeding; ties go to the lowest tool index.
    std::vector<std::size_t> seeds{members.front()};
    std::vector<double> min_distance(members.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> is_seed(members.size(), false);
    is_seed[0] = true;
    while (seeds.size() < branching) {
        const auto& last = vectors[seeds.back()];
        std::size_t best = members.size();
        double best_distance = -1.0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (is_seed[i]) continue;
            min_distance[i] = std::min(min_distance[i], 1.0 - cosine(vectors[members[i]], last));
            if (min_distance[i] > best_distance) {
                best_distance = min_distance[i];
                best = i;
            }
        }
        is_seed[best] = true;
        seeds.push_back(members[best]);
    }

    // Nearest seed; similarity ties go to the smaller cluster, then the earlier seed.
    std::vector<std::vector<std::size_t>> clusters(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) clusters[s].push_back(seeds[s]);
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (is_seed[i]) continue;
        std::size_t best = 0;
        double best_similarity = -1.0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const double sim = cosine(vectors[members[i]], vectors[seeds[s]]);
            if (sim > best_similarity || (sim == best_similarity && clusters[s].size() < clusters[best].size())) {
                best_similarity = sim;
                best = s;
            }
        }
        clusters[best].push_back(members[i]);
    }
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        cluster_recursive(vectors, std::move(clusters[c]), join(c), branching, paths);
    }
}

}  // namespace

std::vector<std::string> hierarchical_paths(const std::vector<ToolDoc>& tools, std::size_t branching) {
    if (branching < 2) throw invalid("InvalidBranching", "branching factor must be at least 2");
    std::vector<TermVector> vectors;
    vectors.reserve(tools.size());
    for (const auto& t : tools) vectors.emplace_back(terms(t.search_text()));
    std::vector<std::size_t> members(tools.size());
    for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
    std::vector<std::string> paths(tools.size());
    if (!tools.empty()) cluster_recursive(vectors, std::move(members), "", branching, paths);
    return paths;
}

// ---------------------------------------------------------------------------
// ToolRegistry

ToolRegistry::ToolRegistry(std::vector<ToolDoc> tools, std::vector<ToolToken> tokens, IndexStrategy strategy,
                           std::size_t branching)
    : tools_(std::move(tools)), tokens_(std::move(tokens)), strategy_(strategy), branching_(branching) {
    by_surface_.reserve(tokens_.size());
    for (const auto& tok : tokens_) by_surface_.emplace(tok.surface, tok.tool_index);
    for (std::size_t i = 0; i < tools_.size(); ++i) by_name_.emplace(tools_[i].name, i);
}

ToolRegistry ToolRegistry::build(std::vector<ToolDoc> tools, IndexStrategy strategy, std::size_t branching) {
    if (tools.empty()) throw invalid("EmptyToolset", "cannot build a registry from an empty toolset");
    if (branching < 2) throw invalid("InvalidBranching", "branching factor must be at least 2");
    std::set<std::string> canonical;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        tools[i].normalize();
        if (!canonical.insert(tools[i].canonical()).second) {
            throw invalid("DuplicateToolDoc", "tool " + std::to_string(i) + " ('" + tools[i].name +
                                                  "') duplicates an earlier tool byte-for-byte");
        }
    }

    std::vector<std::string> surfaces;
    switch (strategy) {
        case IndexStrategy::Atomic: surfaces = atomic_surfaces(tools); break;
        case IndexStrategy::Semantic: {
            std::vector<std::string> names;
            for (const auto& t : tools) names.push_back(t.name);
            surfaces = suffix_collisions(std::move(names));
            break;
        }
        case IndexStrategy::Numeric: surfaces = numeric_surfaces(tools.size()); break;
        case IndexStrategy::Hierarchical: surfaces = hierarchical_paths(tools, branching); break;
    }

    std::vector<ToolToken> tokens;
    tokens.reserve(tools.size());
    for (std::size_t i = 0; i < tools.size(); ++i) tokens.push_back({std::move(surfaces[i]), i});
    return ToolRegistry(std::move(tools), std::move(tokens), strategy, branching);
}

std::optional<ResolvedTool> ToolRegistry::resolve(std::string_view surface) const {
    auto it = by_surface_.find(std::string(surface));
    if (it == by_surface_.end()) return std::nullopt;
    return ResolvedTool{&tools_[it->second], &tokens_[it->second]};
}

std::optional<std::size_t> ToolRegistry::index_of_name(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> ToolRegistry::normalize_reference(std::string_view name_or_surface) const {
    if (auto hit = resolve(name_or_surface)) return hit->token->surface;
    if (auto index = index_of_name(name_or_surface)) return tokens_[*index].surface;
    return std::nullopt;
}

namespace {

constexpr std::string_view kChecksumPrefix = "\ncrc32:";

std::string crc_hex(std::string_view body) {
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    char buffer[9];
    std::snprintf(buffer, sizeof buffer, "%08lx", static_cast<unsigned long>(crc));
    return buffer;
}

ValidationError malformed(const std::string& why) { return invalid("MalformedRegistryFile", why); }

}  // namespace

std::string ToolRegistry::serialize() const {
    Json tools = Json::array();
    for (const auto& t : tools_) tools.push_back(t.to_json());
    Json tokens = Json::array();
    for (const auto& t : tokens_) tokens.push_back({{"surface", t.surface}, {"tool_index", t.tool_index}});
    const Json document = {{"version", kRegistryFormatVersion},
                           {"strategy", std::string(to_string(strategy_))},
                           {"branching", branching_},
                           {"tools", std::move(tools)},
                           {"tokens", std::move(tokens)}};
    std::string body = compact_dump(document);
    return body + std::string(kChecksumPrefix) + crc_hex(body) + "\n";
}

ToolRegistry ToolRegistry::load(std::string_view bytes) {
    const auto pos = bytes.rfind(kChecksumPrefix);
    if (pos == std::string_view::npos) throw malformed("missing trailing checksum");
    const std::string_view body = bytes.substr(0, pos);
    std::string_view stored = bytes.substr(pos + kChecksumPrefix.size());
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.remove_suffix(1);
    if (stored != crc_hex(body)) throw malformed("checksum mismatch");

    Json document;
    try {
        document = Json::parse(body);
    } catch (const Json::exception& e) {
        throw malformed(std::string("invalid JSON: ") + e.what());
    }
    try {
        if (document.at("version").get<int>() != kRegistryFormatVersion) {
            throw malformed("unsupported version " + document.at("version").dump());
        }
        const IndexStrategy strategy = strategy_from_string(document.at("strategy").get<std::string>());
        const auto branching = document.value("branching", kDefaultBranching);
        std::vector<ToolDoc> tools;
        for (const auto& t : document.at("tools")) tools.push_back(ToolDoc::from_json(t));
        const Json& token_list = document.at("tokens");
        if (tools.empty()) throw malformed("registry holds no tools");
        if (token_list.size() != tools.size()) throw malformed("token/tool count mismatch");
        std::vector<ToolToken> tokens(tools.size());
        std::vector<bool> assigned(tools.size(), false);
        std::set<std::string> surfaces;
        for (const auto& entry : token_list) {
            ToolToken tok{entry.at("surface").get<std::string>(), entry.at("tool_index").get<std::size_t>()};
            if (tok.surface.empty()) throw malformed("empty token surface");
            if (tok.tool_index >= tools.size() || assigned[tok.tool_index]) {
                throw malformed("token tool_index out of range or repeated");
            }
            if (!surfaces.insert(tok.surface).second) throw malformed("duplicate token surface '" + tok.surface + "'");
            assigned[tok.tool_index] = true;
            tokens[tok.tool_index] = std::move(tok);
        }
        std::set<std::string> canonical;
        for (const auto& t : tools) {
            if (!canonical.insert(t.canonical()).second) throw malformed("duplicate tool documentation");
        }
        return ToolRegistry(std::move(tools), std::move(tokens), strategy, branching);
    } catch (const ValidationError& e) {
        if (e.kind() == "MalformedRegistryFile") throw;
        throw malformed(e.what());
    } catch (const Json::exception& e) {
        throw malformed(std::string("schema violation: ") + e.what());
    }
}

}  // namespace tinr
