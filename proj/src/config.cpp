#include "factcheck/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "factcheck/common.hpp"

extern char** environ;

namespace factcheck {

namespace {

[[noreturn]] void fail(std::string_view key, const std::string& what) {
    throw ConfigError("config key '" + std::string(key) + "': " + what);
}

double parse_double(std::string_view key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(raw.c_str(), &end);
    if (end != raw.c_str() + raw.size() || raw.empty() || errno == ERANGE) {
        fail(key, "'" + raw + "' is not a number");
    }
    return value;
}

std::int64_t parse_int(std::string_view key, const std::string& raw) {
    errno = 0;
    char* end = nullptr;
    const long long value = std::strtoll(raw.c_str(), &end, 10);
    if (end != raw.c_str() + raw.size() || raw.empty() || errno == ERANGE) {
        fail(key, "'" + raw + "' is not an integer");
    }
    return value;
}

}  // namespace

void Config::set(std::string key, std::string value) {
    values_[std::move(key)] = std::move(value);
}

bool Config::has(std::string_view key) const {
    return values_.find(std::string(key)) != values_.end();
}

std::string Config::get_string(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) fail(key, "missing");
    return it->second;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
    const auto it = values_.find(std::string(key));
    return it == values_.end() ? std::string(fallback) : it->second;
}

std::int64_t Config::get_int(std::string_view key) const {
    return parse_int(key, get_string(key));
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_uint(std::string_view key) const {
    const std::int64_t value = parse_int(key, get_string(key));
    if (value < 0) fail(key, "'" + get_string(key) + "' is negative");
    return static_cast<std::uint64_t>(value);
}

std::uint64_t Config::get_uint(std::string_view key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}

double Config::get_double(std::string_view key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double(std::string_view key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(std::string_view key) const {
    const std::string raw = to_lower(get_string(key));
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    fail(key, "'" + get_string(key) + "' is not a boolean");
}

bool Config::get_bool(std::string_view key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

std::uint64_t Config::hash() const { return fnv1a(canonical()); }

void Config::apply_env_overrides(std::string_view prefix) {
    for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
        const std::string_view entry(*env);
        const std::size_t eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        const std::string_view name = entry.substr(0, eq);
        if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) continue;

        std::string key = to_lower(name.substr(prefix.size()));
        std::size_t pos = 0;
        while ((pos = key.find("__", pos)) != std::string::npos) {
            key.replace(pos, 2, ".");
            pos += 1;
        }
        set(std::move(key), std::string(entry.substr(eq + 1)));
    }
}

Config Config::parse_string(std::string_view text, std::string_view source) {
    Config config;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;

        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        if (key.empty()) {
            throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": empty key");
        }
        config.set(key, trim(std::string_view(stripped).substr(eq + 1)));
    }
    return config;
}

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
}

}  // namespace factcheck
