#pragma once
// Minimal key = value configuration files. One assignment per line, `#`
// comments, values are scalars or comma-separated lists. Quoted strings are
// accepted so the files double as valid TOML for simple editors.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ultr/io.hpp"

namespace ultr {

class KvConfig {
public:
    static KvConfig parse_file(const std::string& path) {
        auto in = detail::open_input(path);
        KvConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::chomp(line);
            const auto stripped = strip(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos) {
                detail::fail_at(path, lineno, "expected 'key = value'");
            }
            const auto key = strip(stripped.substr(0, eq));
            auto value = strip(stripped.substr(eq + 1));
            if (key.empty()) detail::fail_at(path, lineno, "empty key");
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
                value = value.substr(1, value.size() - 2);
            }
            cfg.values_[key] = value;
        }
        cfg.path_ = path;
        return cfg;
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_u64(it->second, path_, 0);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_double(it->second, path_, 0);
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        for (const auto& piece : detail::split(it->second, ',')) {
            out.push_back(detail::parse_double(strip(piece), path_, 0));
        }
        return out;
    }

    std::vector<std::uint64_t> get_u64s(const std::string& key) const {
        std::vector<std::uint64_t> out;
        const auto it = values_.find(key);
        if (it == values_.end()) return out;
        for (const auto& piece : detail::split(it->second, ',')) {
            out.push_back(detail::parse_u64(strip(piece), path_, 0));
        }
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string strip(std::string s) {
        const auto is_space = [](unsigned char c) { return c == ' ' || c == '\t'; };
        while (!s.empty() && is_space(s.front())) s.erase(s.begin());
        while (!s.empty() && is_space(s.back())) s.pop_back();
        return s;
    }

    std::map<std::string, std::string> values_;
    std::string path_;
};

}  // namespace ultr
