#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sf {

/// Flat key=value configuration. Both config files and CLI flags end up here;
/// typed getters raise configuration errors that name the offending key.
class Options {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Reads `key = value` lines; `#` starts a comment, blank lines ignored.
  /// Keys already present are overwritten.
  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::pair<double, double> get_range(const std::string& key,
                                      std::pair<double, double> fallback) const;

  /// Canonical `key=value\n` dump in key order; used for config hashing.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& text);

}  // namespace sf
