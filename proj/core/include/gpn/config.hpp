// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gpn {

/// Line-oriented `key = value` text. Blank lines and `#` comments are
/// ignored. Typed getters mark keys as used so that leftovers can be reported.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string origin = "<string>");
  static KeyValueConfig read_file(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& origin() const { return origin_; }

  // Each getter leaves `out` untouched when the key is absent and throws
  // ConfigError on a malformed value.
  void get(const std::string& key, std::string& out);
  void get(const std::string& key, int& out);
  void get(const std::string& key, long& out);
  void get(const std::string& key, unsigned long& out);
  void get(const std::string& key, double& out);
  void get(const std::string& key, bool& out);
  void get(const std::string& key, std::vector<int>& out);

  /// Throws ConfigError naming the first key no getter asked for.
  void reject_unknown() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* lookup(const std::string& key);
  [[noreturn]] void bad_value(const std::string& key, const Entry& e, std::string_view expected) const;

  std::string origin_;
  std::map<std::string, Entry> values_;
  std::set<std::string> used_;
};

/// Ordered key/value pairs written back out as `key = value` lines.
class KeyValueWriter {
 public:
  KeyValueWriter& add(std::string key, std::string value);
  KeyValueWriter& add(std::string key, const char* value) { return add(std::move(key), std::string(value)); }
  KeyValueWriter& add(std::string key, int value);
  KeyValueWriter& add(std::string key, long value);
  KeyValueWriter& add(std::string key, unsigned long value);
  KeyValueWriter& add(std::string key, double value);
  KeyValueWriter& add(std::string key, bool value);
  KeyValueWriter& add(std::string key, const std::vector<int>& value);

  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace gpn
