#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sinpaint::io {

// Line-oriented `key = value` text. '#' starts a comment line; keys keep
// insertion order on output.
class KeyValue {
public:
    static KeyValue parse(const std::string& text, const std::string& origin = "<text>");
    static KeyValue load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string str() const;

    bool contains(const std::string& key) const { return index_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, double value);
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    // Throw ConfigError naming the key on a missing key or malformed value.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    std::string origin() const { return origin_; }

private:
    std::optional<std::string> find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
    std::string origin_ = "<config>";
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace sinpaint::io
