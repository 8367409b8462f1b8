// Flat `section.key = value` config files for the CLI. '#' starts a
// comment; keys are consumed by the caller and anything left over is an
// error, never a warning.
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "wunet/core.hpp"

namespace wunet {

namespace detail {

inline std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

class ConfigOverlay {
public:
    ConfigOverlay() = default;

    static ConfigOverlay from_file(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) fail(ErrorCode::MissingFile, "cannot open config file: " + path.string());
        ConfigOverlay cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            std::string t = detail::strip(line);
            if (t.empty()) continue;
            size_t eq = t.find('=');
            if (eq == std::string::npos)
                fail(ErrorCode::ConfigInvalid,
                     path.string() + ":" + std::to_string(lineno) + ": expected key = value");
            std::string key = detail::strip(t.substr(0, eq));
            std::string value = detail::strip(t.substr(eq + 1));
            if (key.empty() || key.find('.') == std::string::npos)
                fail(ErrorCode::ConfigInvalid,
                     path.string() + ":" + std::to_string(lineno) + ": keys must look like section.key");
            if (!cfg.values_.emplace(key, value).second)
                fail(ErrorCode::ConfigInvalid,
                     path.string() + ":" + std::to_string(lineno) + ": duplicate key " + key);
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    // Typed getters mark the key consumed; finish() rejects leftovers.
    template <typename F>
    void apply(const std::string& key, F&& setter) {
        auto it = values_.find(key);
        if (it == values_.end()) return;
        consumed_.insert(key);
        setter(it->second);
    }

    void apply_int(const std::string& key, int& out) {
        apply(key, [&](const std::string& v) { out = parse_int(key, v); });
    }
    void apply_double(const std::string& key, double& out) {
        apply(key, [&](const std::string& v) { out = parse_double(key, v); });
    }
    void apply_float(const std::string& key, float& out) {
        apply(key, [&](const std::string& v) { out = static_cast<float>(parse_double(key, v)); });
    }
    void apply_u64(const std::string& key, uint64_t& out) {
        apply(key, [&](const std::string& v) { out = parse_u64(key, v); });
    }
    void apply_string(const std::string& key, std::string& out) {
        apply(key, [&](const std::string& v) { out = v; });
    }

    void finish() const {
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key))
                fail(ErrorCode::ConfigInvalid, "unknown config key: " + key);
    }

    static int parse_int(const std::string& key, const std::string& v) {
        int out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
            fail(ErrorCode::ConfigInvalid, "config key " + key + ": not an integer: " + v);
        return out;
    }
    static uint64_t parse_u64(const std::string& key, const std::string& v) {
        uint64_t out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
            fail(ErrorCode::ConfigInvalid, "config key " + key + ": not an unsigned integer: " + v);
        return out;
    }
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            double out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            fail(ErrorCode::ConfigInvalid, "config key " + key + ": not a number: " + v);
        }
    }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace wunet
