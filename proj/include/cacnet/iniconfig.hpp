#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cacnet/errors.hpp"

// Minimal INI reader for CLI config files: [section] headers, key = value
// pairs, '#' or ';' comments. Values are kept as strings; typed getters
// convert on demand and report the section.key on failure.

namespace cacnet {

class IniFile {
public:
    void set(const std::string& section, const std::string& key, std::string value);
    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// origin names the source in error messages ("file.ini:12: ...").
IniFile parse_ini(const std::string& text, const std::string& origin);
IniFile read_ini_file(const std::string& path);

}  // namespace cacnet
