#include "predplan/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace predplan {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& source) {
    Config cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source, lineno, "expected `key = value`");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(source, lineno, "empty key");
        if (cfg.entries_.count(key)) {
            throw ConfigError(source, lineno, "duplicate key '" + key + "'");
        }
        cfg.entries_[key] = {value, lineno};
    }
    return cfg;
}

int Config::line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
}

void Config::fail(const std::string& key, const std::string& message) const {
    throw ConfigError(source_, line_of(key), "key '" + key + "': " + message);
}

std::string Config::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(source_, 0, "missing key '" + key + "'");
    return it->second.value;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') fail(key, "'" + v + "' is not a number");
    return d;
}

int Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long d = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail(key, "'" + v + "' is not an integer");
    return static_cast<int>(d);
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const unsigned long long d = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail(key, "'" + v + "' is not an unsigned integer");
    return d;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    const std::string v = get_string(key);
    std::vector<int> out;
    std::istringstream in(v);
    std::string part;
    while (std::getline(in, part, ',')) {
        const std::string p = trim(part);
        if (p.empty()) fail(key, "empty list element");
        char* end = nullptr;
        const long d = std::strtol(p.c_str(), &end, 10);
        if (end == p.c_str() || *end != '\0') fail(key, "'" + p + "' is not an integer");
        out.push_back(static_cast<int>(d));
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    entries_[key] = {value, 0};
}

std::vector<std::pair<std::string, std::string>> Config::items() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_) out.emplace_back(k, e.value);
    return out;
}

}  // namespace predplan
