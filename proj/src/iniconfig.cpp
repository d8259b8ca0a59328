#include "cacnet/iniconfig.hpp"

#include <cctype>
#include <sstream>

#include "cacnet/fsio.hpp"

namespace cacnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key, const std::string& value,
                            const char* want) {
    throw ConfigError("config value " + section + "." + key + " = \"" + value + "\" is not " + want);
}

}  // namespace

void IniFile::set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) != 0;
}

const std::string& IniFile::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s != sections_.end()) {
        auto k = s->second.find(key);
        if (k != s->second.end()) return k->second;
    }
    throw ConfigError("missing config key " + section + "." + key);
}

std::string IniFile::get_string(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double IniFile::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) bad_value(section, key, v, "a number");
        return out;
    } catch (const std::logic_error&) {
        bad_value(section, key, v, "a number");
    }
}

std::int64_t IniFile::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    try {
        std::size_t pos = 0;
        std::int64_t out = std::stoll(v, &pos);
        if (pos != v.size()) bad_value(section, key, v, "an integer");
        return out;
    } catch (const std::logic_error&) {
        bad_value(section, key, v, "an integer");
    }
}

std::uint64_t IniFile::get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') bad_value(section, key, v, "a non-negative integer");
        std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) bad_value(section, key, v, "a non-negative integer");
        return out;
    } catch (const std::logic_error&) {
        bad_value(section, key, v, "a non-negative integer");
    }
}

bool IniFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key);
    for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad_value(section, key, get(section, key), "a boolean");
}

IniFile parse_ini(const std::string& text, const std::string& origin) {
    IniFile ini;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        if (section.empty()) fail(origin, lineno, "key \"" + key + "\" outside any [section]");
        ini.set(section, key, std::move(value));
    }
    return ini;
}

IniFile read_ini_file(const std::string& path) {
    return parse_ini(read_file_bytes(path), path);
}

}  // namespace cacnet
