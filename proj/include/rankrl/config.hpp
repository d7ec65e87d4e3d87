#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace rankrl {

// Flat view of a nested key-value config file: one `a.b.c = value` per
// line, `#` comments. Typed getters mark keys as consumed; finish() turns
// any unconsumed key into a hard error so typos cannot silently change an
// experiment.
class ConfigMap {
 public:
  ConfigMap() = default;
  static ConfigMap parse_file(const std::filesystem::path& p);
  static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);

  // throws listing every key never consumed by a getter
  void finish() const;

 private:
  std::string origin_ = "<empty>";
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

}  // namespace rankrl
