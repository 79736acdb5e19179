#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "roler/common.hpp"

namespace roler {

// Flat `[section]` / `key = value` config files. Keys are addressed as
// "section.key"; `#` starts a comment. Unknown keys are rejected against the
// schema the caller supplies, so typos fail loudly.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    long get_long(const std::string& key) const;
    long get_long_or(const std::string& key, long fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    uint64_t get_u64_or(const std::string& key, uint64_t fallback) const;
    std::vector<long> get_long_list(const std::string& key) const;   // comma separated
    std::vector<std::string> get_string_list(const std::string& key) const;

    // config_error on any present key outside `allowed`.
    void require_known_keys(const std::set<std::string>& allowed) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // FNV-1a over the sorted normalized entries; stable across whitespace and
    // ordering differences in the source file.
    uint64_t hash() const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace roler
