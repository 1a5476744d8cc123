#include "core/keyvalue.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/errors.h"

namespace salseg {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (kv.entries_.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
        }
        kv.entries_[key] = value;
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const { return entries_.count(key) != 0; }

int KeyValueFile::get_int(const std::string& key, int fallback) {
    return static_cast<int>(get_long(key, fallback));
}

long long KeyValueFile::get_long(const std::string& key, long long fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0') {
        throw ConfigError(origin_ + ": key `" + key + "`: not an integer: " + it->second);
    }
    return v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0') {
        throw ConfigError(origin_ + ": key `" + key + "`: not a number: " + it->second);
    }
    return v;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return it->second;
}

void KeyValueFile::finish() const {
    std::string unknown;
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (!consumed_.count(key)) {
            if (!unknown.empty()) unknown += ", ";
            unknown += key;
        }
    }
    if (!unknown.empty()) {
        throw ConfigError(origin_ + ": unknown keys: " + unknown);
    }
}

std::string KeyValueFile::serialize(const std::map<std::string, std::string>& entries) {
    std::string out;
    for (const auto& [key, value] : entries) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

}  // namespace salseg
