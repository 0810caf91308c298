#include "sinpaint/io/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sinpaint/errors.hpp"

namespace sinpaint::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

KeyValue KeyValue::parse(const std::string& text, const std::string& origin) {
    KeyValue kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        }
        const auto key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv.set(key, trim(t.substr(eq + 1)));
    }
    return kv;
}

KeyValue KeyValue::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void KeyValue::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << str();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string KeyValue::str() const {
    std::string s;
    for (const auto& [k, v] : entries_) s += k + " = " + v + "\n";
    return s;
}

void KeyValue::set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it != index_.end()) {
        entries_[it->second].second = value;
        return;
    }
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
}

void KeyValue::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValue::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

std::optional<std::string> KeyValue::find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].second;
}

std::string KeyValue::get_string(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return *v;
}

double KeyValue::get_double(const std::string& key) const {
    const auto s = get_string(key);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(origin_ + ": key '" + key + "' expects a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t KeyValue::get_u64(const std::string& key) const {
    const auto s = get_string(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(origin_ + ": key '" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool KeyValue::get_bool(const std::string& key) const {
    const auto s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(origin_ + ": key '" + key + "' expects true/false, got '" + s + "'");
}

std::string KeyValue::get_string(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
}
double KeyValue::get_double(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
}
std::uint64_t KeyValue::get_u64(const std::string& key, std::uint64_t fallback) const {
    return contains(key) ? get_u64(key) : fallback;
}
bool KeyValue::get_bool(const std::string& key, bool fallback) const {
    return contains(key) ? get_bool(key) : fallback;
}

}  // namespace sinpaint::io
