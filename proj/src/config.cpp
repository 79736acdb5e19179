#include "roler/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace roler {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw parse_error(origin, line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw parse_error(origin, line_no, "empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw parse_error(origin, line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw parse_error(origin, line_no, "empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full)) throw parse_error(origin, line_no, "duplicate key " + full);
        cfg.values_[full] = value;
    }
    return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error(key, "missing required field");
    return it->second;
}

std::string KeyValueConfig::get_string_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long KeyValueConfig::get_long(const std::string& key) const {
    std::string v = get_string(key);
    try {
        size_t pos = 0;
        long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error(key, "not an integer: '" + v + "'");
    }
}

long KeyValueConfig::get_long_or(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key) const {
    std::string v = get_string(key);
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error(key, "not a number: '" + v + "'");
    }
}

double KeyValueConfig::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KeyValueConfig::get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error(key, "not a boolean: '" + v + "'");
}

uint64_t KeyValueConfig::get_u64_or(const std::string& key, uint64_t fallback) const {
    if (!has(key)) return fallback;
    std::string v = get_string(key);
    try {
        size_t pos = 0;
        unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error(key, "not an unsigned integer: '" + v + "'");
    }
}

std::vector<long> KeyValueConfig::get_long_list(const std::string& key) const {
    std::vector<long> out;
    for (const auto& tok : get_string_list(key)) {
        try {
            size_t pos = 0;
            out.push_back(std::stol(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw config_error(key, "not an integer list entry: '" + tok + "'");
        }
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key) const {
    std::string v = get_string(key);
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            if (std::string t = trim(cur); !t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (std::string t = trim(cur); !t.empty()) out.push_back(t);
    if (out.empty()) throw config_error(key, "empty list");
    return out;
}

void KeyValueConfig::require_known_keys(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_)
        if (!allowed.count(key)) throw config_error(key, "unknown field");
}

uint64_t KeyValueConfig::hash() const {
    uint64_t h = kFnvOffset;
    for (const auto& [key, value] : values_) {
        h = fnv1a64(key, h);
        h = fnv1a64("=", h);
        h = fnv1a64(value, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

}  // namespace roler
