#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace salseg {

// Flat `key = value` text format used for every on-disk config. `#` starts a
// comment. Keys are consumed by typed getters; after all consumers ran,
// unknown (never-consumed) keys are an error.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const;

    int get_int(const std::string& key, int fallback);
    double get_double(const std::string& key, double fallback);
    std::string get_string(const std::string& key, const std::string& fallback);
    long long get_long(const std::string& key, long long fallback);

    // Throws ConfigError naming every key that no consumer asked for.
    void finish() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

    static std::string serialize(const std::map<std::string, std::string>& entries);

private:
    std::string origin_;
    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> consumed_;
};

}  // namespace salseg
