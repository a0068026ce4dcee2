#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "clot/common.hpp"

namespace clot {

/// Flat key-value configuration document: one `key = value` pair per line,
/// `#` comments, blank lines ignored.  Typed getters mark keys as consumed so
/// that reject_unknown() can flag misspelled or unsupported keys; values set
/// programmatically (e.g. command-line overrides) replace file values.
class ConfigDoc {
 public:
  ConfigDoc() = default;

  static ConfigDoc parse_file(const std::string& path);
  static ConfigDoc parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback);
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback);

  /// Throws listing every key that was never consumed by a getter.
  void reject_unknown() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string take(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

}  // namespace clot
