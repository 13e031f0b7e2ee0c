#include "tinr/config.hpp"

#include "tinr/error.hpp"
#include "tinr/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace tinr {

namespace {

using Sections = std::map<std::string, std::map<std::string, std::string>>;

ValidationError invalid(const std::string& why) { return ValidationError("InvalidConfig", why); }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

Sections read_ini(std::string_view text) {
    boost::property_tree::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw invalid("line " + std::to_string(e.line()) + ": " + e.message());
    }
    Sections out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw invalid("key '" + section + "' outside a section");
        auto& target = out[section];
        for (const auto& [key, value] : body) target[key] = trim(value.data());
    }
    return out;
}

Sections read_json(std::string_view text) {
    Json json;
    try {
        json = Json::parse(text);
    } catch (const Json::exception& e) {
        throw invalid(std::string("malformed JSON config: ") + e.what());
    }
    if (!json.is_object()) throw invalid("JSON config must be an object");
    Sections out;
    for (const auto& [section, body] : json.items()) {
        if (section == "schema_version") continue;
        if (!body.is_object()) throw invalid("section '" + section + "' must be an object");
        auto& target = out[section];
        for (const auto& [key, value] : body.items()) {
            target[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
    }
    return out;
}

double to_real(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || std::isnan(v)) throw invalid(key + ": not a number: '" + text + "'");
    return v;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text) {
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) throw invalid(key + ": not an integer: '" + text + "'");
    return v;
}

std::string render_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void apply_sections(Config& c, const Sections& sections) {
    for (const auto& [section, keys] : sections) {
        if (section == "datasets") {
            for (const auto& [split, path] : keys) {
                try {
                    split_from_string(split);
                } catch (const Error&) {
                    throw invalid("datasets." + split + ": unknown split");
                }
                if (path.empty()) throw invalid("datasets." + split + ": empty path");
                c.dataset_paths[split] = path;
            }
            continue;
        }
        for (const auto& [key, value] : keys) {
            const std::string name = section + "." + key;
            try {
                if (name == "registry.path") c.registry_path = value;
                else if (name == "registry.strategy") c.strategy = strategy_from_string(value);
                else if (name == "registry.branching") c.branching = to_integer<std::size_t>(name, value);
                else if (name == "reward.epsilon") c.reward.epsilon = to_real(name, value);
                else if (name == "reward.group_size") c.reward.group_size = to_integer<std::size_t>(name, value);
                else if (name == "reward.multi_step_scoring") c.reward.multi_step_scoring = scoring_mode_from_string(value);
                else if (name == "dataconstruct.k") c.dataconstruct.k = to_integer<std::size_t>(name, value);
                else if (name == "dataconstruct.retrieved_count") c.dataconstruct.retrieved_count = to_integer<std::size_t>(name, value);
                else if (name == "dataconstruct.seed") c.dataconstruct.seed = to_integer<std::uint64_t>(name, value);
                else if (name == "losses.alpha") c.losses.alpha = to_real(name, value);
                else if (name == "losses.beta") c.losses.beta = to_real(name, value);
                else if (name == "service.bind_address") c.service.bind_address = value;
                else if (name == "service.port") c.service.port = to_integer<int>(name, value);
                else if (name == "service.max_concurrent") c.service.max_concurrent = to_integer<std::size_t>(name, value);
                else if (name == "driver.max_steps") c.max_steps = to_integer<std::size_t>(name, value);
                else if (name == "driver.max_chars") c.max_chars = to_integer<std::size_t>(name, value);
                else throw invalid("unknown key '" + name + "'");
            } catch (const ValidationError& e) {
                if (e.kind() == "InvalidConfig") throw;
                throw invalid(name + ": " + e.what());
            }
        }
    }
}

void validate(const Config& c) {
    if (c.branching < 2) throw invalid("registry.branching must be >= 2");
    if (!(c.reward.epsilon > 0.0)) throw invalid("reward.epsilon must be > 0");
    if (c.reward.group_size < 2) throw invalid("reward.group_size must be >= 2");
    if (c.dataconstruct.k < 1) throw invalid("dataconstruct.k must be >= 1");
    if (c.dataconstruct.retrieved_count > c.dataconstruct.k) {
        throw invalid("dataconstruct.retrieved_count must not exceed dataconstruct.k");
    }
    for (double w : {c.losses.alpha, c.losses.beta}) {
        if (!std::isfinite(w) || w < 0.0) throw invalid("losses.alpha and losses.beta must be finite and >= 0");
    }
    if (c.service.bind_address.empty()) throw invalid("service.bind_address must not be empty");
    if (c.service.port < 0 || c.service.port > 65535) throw invalid("service.port must be in [0, 65535]");
    if (c.service.max_concurrent < 1) throw invalid("service.max_concurrent must be >= 1");
    if (c.max_steps < 1 || c.max_chars < 1) throw invalid("driver budgets must be >= 1");
}

}  // namespace

std::filesystem::path Config::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

std::filesystem::path Config::dataset_path(const std::string& split) const {
    auto it = dataset_paths.find(split);
    if (it == dataset_paths.end()) throw invalid("no dataset configured for split '" + split + "'");
    return resolve(it->second);
}

bool Config::operator==(const Config& o) const {
    return registry_path == o.registry_path && strategy == o.strategy && branching == o.branching &&
           dataset_paths == o.dataset_paths && reward == o.reward && dataconstruct == o.dataconstruct &&
           losses == o.losses && service == o.service && max_steps == o.max_steps && max_chars == o.max_chars;
}

Config parse_config(std::string_view text, const std::filesystem::path& base_dir, bool check_paths) {
    const std::string body = trim(text);
    Config config;
    config.base_dir = base_dir;
    apply_sections(config, !body.empty() && body.front() == '{' ? read_json(body) : read_ini(text));
    validate(config);
    if (check_paths) {
        auto require = [&config](const std::string& key, const std::string& path) {
            if (!std::filesystem::exists(config.resolve(path))) {
                throw IoError(key + ": no such file '" + config.resolve(path).string() + "'");
            }
        };
        if (!config.registry_path.empty()) require("registry.path", config.registry_path);
        for (const auto& [split, path] : config.dataset_paths) require("datasets." + split, path);
    }
    return config;
}

Config load_config(const std::filesystem::path& path, bool check_paths) {
    return parse_config(read_file(path), path.parent_path(), check_paths);
}

std::string render_config(const Config& c) {
    std::string out;
    auto line = [&out](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };
    out += "[registry]\n";
    if (!c.registry_path.empty()) line("path", c.registry_path);
    line("strategy", std::string(to_string(c.strategy)));
    line("branching", std::to_string(c.branching));
    if (!c.dataset_paths.empty()) {
        out += "\n[datasets]\n";
        for (const auto& [split, path] : c.dataset_paths) line(split, path);
    }
    out += "\n[reward]\n";
    line("epsilon", render_real(c.reward.epsilon));
    line("group_size", std::to_string(c.reward.group_size));
    line("multi_step_scoring", std::string(to_string(c.reward.multi_step_scoring)));
    out += "\n[dataconstruct]\n";
    line("k", std::to_string(c.dataconstruct.k));
    line("retrieved_count", std::to_string(c.dataconstruct.retrieved_count));
    line("seed", std::to_string(c.dataconstruct.seed));
    out += "\n[losses]\n";
    line("alpha", render_real(c.losses.alpha));
    line("beta", render_real(c.losses.beta));
    out += "\n[service]\n";
    line("bind_address", c.service.bind_address);
    line("port", std::to_string(c.service.port));
    line("max_concurrent", std::to_string(c.service.max_concurrent));
    out += "\n[driver]\n";
    line("max_steps", std::to_string(c.max_steps));
    line("max_chars", std::to_string(c.max_chars));
    return out;
}

Json config_to_json(const Config& c) {
    Json datasets = Json::object();
    for (const auto& [split, path] : c.dataset_paths) datasets[split] = path;
    return Json{{"schema_version", 1},
                {"registry", {{"path", c.registry_path}, {"strategy", to_string(c.strategy)}, {"branching", c.branching}}},
                {"datasets", datasets},
                {"reward",
                 {{"epsilon", render_real(c.reward.epsilon)},
                  {"group_size", c.reward.group_size},
                  {"multi_step_scoring", to_string(c.reward.multi_step_scoring)}}},
                {"dataconstruct",
                 {{"k", c.dataconstruct.k}, {"retrieved_count", c.dataconstruct.retrieved_count}, {"seed", c.dataconstruct.seed}}},
                {"losses", {{"alpha", c.losses.alpha}, {"beta", c.losses.beta}}},
                {"service",
                 {{"bind_address", c.service.bind_address},
                  {"port", c.service.port},
                  {"max_concurrent", c.service.max_concurrent}}},
                {"driver", {{"max_steps", c.max_steps}, {"max_chars", c.max_chars}}}};
}

}  // namespace tinr
