#pragma once

#include <map>
#include <optional>
#include <string>

// Flat key-value experiment configs:
//   key = value
//   # comment
//   include other.cfg      (path relative to the including file)
// Later assignments override earlier ones, so an including file wins over
// what it includes.

namespace anlg::harness {

class Config {
  public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& base_dir = ".");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;

    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    // other's entries override ours
    void merge(const Config& other);

    // sorted `key = value` lines
    std::string resolved() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace anlg::harness
