#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace coalsim {

using json = nlohmann::json;

/// Raised for malformed or physically invalid configuration. The CLI maps
/// it to a nonzero exit with the message on stderr.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfg {

/// Rejects unknown keys. Config typos must fail loudly instead of silently
/// running a default, so every section parser calls this with its full key
/// list before reading anything.
inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError(where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known)
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
    }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(where + ": missing required key \"" + std::string(key) + "\"");
    return *it;
}

inline double get_num(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline double get_num_or(const json& j, const char* key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

inline std::int64_t get_int(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number_integer())
        throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<std::int64_t>();
}

inline std::int64_t get_int_or(const json& j, const char* key, std::int64_t fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<std::int64_t>();
}

inline std::string get_str(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_string())
        throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline std::string get_str_or(const json& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<std::string>();
}

inline bool get_bool_or(const json& j, const char* key, bool fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<bool>();
}

} // namespace cfg

/// FNV-1a over the canonical (sorted-key, fixed-precision) dump. Used to
/// key the result cache; two configs hash equal iff their canonical JSON
/// matches.
inline std::uint64_t config_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace coalsim
