#pragma once

// Flat key = value experiment configuration. '#' starts a comment, blank
// lines are skipped, later assignments win. Unknown keys are rejected once
// binding is finished, so typos fail loudly instead of silently defaulting.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace attnlab {

class KeyValueConfig {
 public:
  static KeyValueConfig from_string(const std::string& text);
  static KeyValueConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback);
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback);
  std::vector<std::uint64_t> get_seed_list(const std::string& key);

  /// Throws naming every key that was set but never read.
  void reject_unknown_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

std::vector<std::string> split_csv_list(const std::string& text);

}  // namespace attnlab
