#ifndef ADPREDICT_KV_CONFIG_HPP
#define ADPREDICT_KV_CONFIG_HPP

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adpredict/error.hpp"

namespace adpredict {

namespace detail {
inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}
}  // namespace detail

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Later assignments override earlier ones, so `--set` overrides can be appended.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text) {
        KeyValueConfig cfg;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto t = detail::trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
            }
            const auto key = detail::trim(t.substr(0, eq));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[std::string(key)] = std::string(detail::trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        double v = 0;
        const auto& s = it->second;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) {
            throw ConfigError("config key '" + key + "': not a number: " + s);
        }
        return v;
    }

    long long get_int(const std::string& key, long long fallback) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        long long v = 0;
        const auto& s = it->second;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) {
            throw ConfigError("config key '" + key + "': not an integer: " + s);
        }
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& s = it->second;
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config key '" + key + "': not a boolean: " + s);
    }

    /// Comma-separated list; empty value yields an empty list.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const {
        used_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (detail::trim(it->second).empty()) return {};
        return detail::split(it->second, ',');
    }

    /// Keys present in the file that no getter has asked for.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) {
            if (!used_.count(k)) out.push_back(k);
        }
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

}  // namespace adpredict

#endif  // ADPREDICT_KV_CONFIG_HPP
