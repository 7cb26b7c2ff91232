#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "factcheck/errors.hpp"

namespace factcheck {

// Flat key/value settings with dotted section names:
//
//   # retrieval stage
//   retrieval.k = 5
//   backend.name = stub
//
// Lines whose first non-space character is '#' are comments; values keep
// everything after the first '=' (trimmed), so they may contain '#' or '='.
// Later assignments to the same key win.
class Config {
public:
    void set(std::string key, std::string value);
    bool has(std::string_view key) const;

    // Typed accessors throw ConfigError naming the key when it is absent or
    // does not parse; the fallback overloads only throw on a parse failure.
    std::string get_string(std::string_view key) const;
    std::string get_string(std::string_view key, std::string_view fallback) const;
    std::int64_t get_int(std::string_view key) const;
    std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
    std::uint64_t get_uint(std::string_view key) const;
    std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
    double get_double(std::string_view key) const;
    double get_double(std::string_view key, double fallback) const;
    bool get_bool(std::string_view key) const;
    bool get_bool(std::string_view key, bool fallback) const;

    const std::map<std::string, std::string>& items() const { return values_; }
    std::size_t size() const { return values_.size(); }

    // One "key = value" line per entry in sorted key order. Two configs with
    // the same effective settings render identically regardless of input
    // formatting, so hash() doubles as a provenance fingerprint.
    std::string canonical() const;
    std::uint64_t hash() const;

    // Overlays environment variables that carry `prefix`: the remainder is
    // lowercased and every "__" becomes ".", so FACTCHECK_RETRIEVAL__K=9
    // sets retrieval.k. Values are taken verbatim.
    void apply_env_overrides(std::string_view prefix = "FACTCHECK_");

    static Config parse_string(std::string_view text, std::string_view source = "<string>");
    static Config parse_file(const std::filesystem::path& path);

    bool operator==(const Config&) const = default;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace factcheck
