#include "anlg/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace anlg::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void parse_into(Config& cfg, const std::string& text, const std::string& base_dir,
                const std::string& origin, int depth) {
    if (depth > 16) throw std::runtime_error(origin + ": include nesting too deep");
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.rfind("include ", 0) == 0 || t == "include") {
            const std::string rel = trim(t.substr(7));
            if (rel.empty()) {
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": include needs a path");
            }
            const std::filesystem::path p = std::filesystem::path(base_dir) / rel;
            std::ifstream f(p);
            if (!f) {
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": cannot open include " + p.string());
            }
            std::ostringstream ss;
            ss << f.rdbuf();
            parse_into(cfg, ss.str(), p.parent_path().string(), p.string(), depth + 1);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected `key = value`, got: " + t);
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        cfg.set(key, value);
    }
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    Config cfg;
    parse_into(cfg, ss.str(), std::filesystem::path(path).parent_path().string(), path, 0);
    return cfg;
}

Config Config::from_string(const std::string& text, const std::string& base_dir) {
    Config cfg;
    parse_into(cfg, text, base_dir, "<string>", 0);
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::optional<std::string> Config::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + " is not a number: " + *v);
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stoi(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + " is not an integer: " + *v);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + " is not an integer: " + *v);
    }
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.kv_) kv_[k] = v;
}

std::string Config::resolved() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace anlg::harness
