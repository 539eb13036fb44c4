#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace predplan {

// Config / CLI usage errors. `line` is 0 when no source line applies.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string source, int line, const std::string& message)
        : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message
                                      : source + ": " + message),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const { return source_; }
    int line() const { return line_; }

private:
    std::string source_;
    int line_;
};

// Flat `key = value` file with '#' comments and dotted keys for nesting.
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& source = "<config>");

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    int line_of(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);  // overrides (line 0)

    // keys in sorted order, for manifests
    std::vector<std::pair<std::string, std::string>> items() const;

    const std::string& source() const { return source_; }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const;

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string source_ = "<config>";
    std::map<std::string, Entry> entries_;
};

}  // namespace predplan
