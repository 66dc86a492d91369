/**
 * @file config.hpp
 * @brief Sectioned key = value run configuration.
 *
 *   # comment
 *   [experiment]
 *   kind = hconv
 *   [run]
 *   n_list = 1, 2, 4
 */
#pragma once

#include "homlab/csv.hpp"
#include "homlab/error.hpp"
#include "homlab/linalg.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace homlab {

/// Accepted sections and keys, in canonical order.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>& config_schema()
{
    static const std::vector<std::pair<std::string, std::vector<std::string>>> schema{
        {"experiment", {"kind", "description"}},
        {"domain", {"dim", "cells"}},
        {"sequence",
         {"kind", "profile", "mean", "amplitude", "low", "high", "fraction", "value", "case", "coupling", "regime",
          "size", "rank", "coefficients", "t_matrix", "a_matrix"}},
        {"run",
         {"n_list", "cells_per_period", "probe_seed", "seed", "trials", "tolerance", "candidate", "lambda", "jobs",
          "output"}},
    };
    return schema;
}

/**
 * @brief Parsed configuration. Values are kept as trimmed text; typed
 * accessors convert on demand and name the offending key on failure.
 */
class RunConfig {
public:
    using Section = std::map<std::string, std::string>;

    static RunConfig parse(std::istream& is, const std::string& source = "<config>")
    {
        RunConfig c;
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string where = source + ":" + std::to_string(lineno);
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                HOMLAB_THROW_IF(line.back() != ']', ConfigError, where + ": malformed section header '" + line + "'");
                section = trim(line.substr(1, line.size() - 2));
                HOMLAB_THROW_IF(!known_section(section), ConfigError, where + ": unknown section [" + section + "]");
                continue;
            }
            const auto eq = line.find('=');
            HOMLAB_THROW_IF(eq == std::string::npos, ConfigError, where + ": expected 'key = value'");
            HOMLAB_THROW_IF(section.empty(), ConfigError, where + ": key outside of any section");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            HOMLAB_THROW_IF(!known_key(section, key), ConfigError,
                            where + ": unknown key '" + key + "' in [" + section + "]");
            HOMLAB_THROW_IF(c.sections_[section].count(key), ConfigError,
                            where + ": duplicate key '" + key + "' in [" + section + "]");
            HOMLAB_THROW_IF(value.empty(), ConfigError, where + ": empty value for '" + key + "'");
            c.sections_[section][key] = value;
        }
        c.origin_ = source;
        return c;
    }

    static RunConfig parse_string(const std::string& text, const std::string& source = "<config>")
    {
        std::istringstream is(text);
        return parse(is, source);
    }

    static RunConfig load(const std::string& path)
    {
        std::ifstream in(path);
        HOMLAB_THROW_IF(!in, ConfigError, "cannot open config file '" + path + "'");
        return parse(in, path);
    }

    /// Canonical text: schema order, one key per line.
    std::string serialize() const
    {
        std::ostringstream os;
        bool first = true;
        for (const auto& [name, keys] : config_schema()) {
            const auto it = sections_.find(name);
            if (it == sections_.end() || it->second.empty()) continue;
            if (!first) os << "\n";
            first = false;
            os << "[" << name << "]\n";
            for (const auto& k : keys)
                if (const auto kv = it->second.find(k); kv != it->second.end()) os << k << " = " << kv->second << "\n";
        }
        return os.str();
    }

    std::string digest() const { return fnv1a_hex(serialize()); }

    /// Path given to parse/load; relative data files resolve against its directory.
    const std::string& origin() const { return origin_; }

    std::string resolve_path(const std::string& file) const
    {
        const std::filesystem::path p(file);
        if (p.is_absolute() || origin_.empty() || origin_.front() == '<') return file;
        return (std::filesystem::path(origin_).parent_path() / p).string();
    }

    bool operator==(const RunConfig& o) const { return sections_ == o.sections_; }

    bool has(const std::string& section, const std::string& key) const
    {
        const auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key);
    }

    void set(const std::string& section, const std::string& key, const std::string& value)
    {
        HOMLAB_THROW_IF(!known_key(section, key), ConfigError, "unknown key '" + key + "' in [" + section + "]");
        sections_[section][key] = value;
    }

    void require(const std::string& section, const std::string& key) const
    {
        HOMLAB_THROW_IF(!has(section, key), ConfigError, "missing required key '" + key + "' in [" + section + "]");
    }

    std::string text(const std::string& section, const std::string& key) const
    {
        require(section, key);
        return sections_.at(section).at(key);
    }
    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const
    {
        return has(section, key) ? text(section, key) : fallback;
    }

    Real real(const std::string& section, const std::string& key) const
    {
        return to_real(text(section, key), section, key);
    }
    Real real(const std::string& section, const std::string& key, Real fallback) const
    {
        return has(section, key) ? real(section, key) : fallback;
    }

    std::int64_t integer(const std::string& section, const std::string& key) const
    {
        return to_int(text(section, key), section, key);
    }
    std::int64_t integer(const std::string& section, const std::string& key, std::int64_t fallback) const
    {
        return has(section, key) ? integer(section, key) : fallback;
    }

    /// Comma-separated positive integers.
    std::vector<std::int64_t> integer_list(const std::string& section, const std::string& key) const
    {
        std::vector<std::int64_t> out;
        std::stringstream ss(text(section, key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto v = to_int(trim(item), section, key);
            HOMLAB_THROW_IF(v <= 0, ConfigError, "[" + section + "] " + key + ": entries must be positive");
            out.push_back(v);
        }
        HOMLAB_THROW_IF(out.empty(), ConfigError, "[" + section + "] " + key + ": empty list");
        return out;
    }

    /// Comma-separated reals.
    std::vector<Real> real_list(const std::string& section, const std::string& key) const
    {
        std::vector<Real> out;
        std::stringstream ss(text(section, key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_real(trim(item), section, key));
        return out;
    }

    const std::map<std::string, Section>& sections() const { return sections_; }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static bool known_section(const std::string& s)
    {
        const auto& sc = config_schema();
        return std::any_of(sc.begin(), sc.end(), [&](const auto& p) { return p.first == s; });
    }

    static bool known_key(const std::string& s, const std::string& k)
    {
        for (const auto& [name, keys] : config_schema())
            if (name == s) return std::find(keys.begin(), keys.end(), k) != keys.end();
        return false;
    }

    static Real to_real(const std::string& v, const std::string& s, const std::string& k)
    {
        try {
            std::size_t pos = 0;
            const Real r = std::stod(v, &pos);
            if (pos == v.size()) return r;
        } catch (const std::exception&) {
        }
        throw ConfigError("[" + s + "] " + k + ": '" + v + "' is not a number");
    }

    static std::int64_t to_int(const std::string& v, const std::string& s, const std::string& k)
    {
        std::int64_t r = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), r);
        HOMLAB_THROW_IF(ec != std::errc() || p != v.data() + v.size(), ConfigError,
                        "[" + s + "] " + k + ": '" + v + "' is not an integer");
        return r;
    }

    std::map<std::string, Section> sections_;
    std::string origin_;
};

} // namespace homlab
