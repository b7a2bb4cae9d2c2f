#pragma once

// Line-oriented "key = value" files with [sections]; '#' and ';' start
// comments. Every value remembers where it came from so that later
// validation can point at the offending line and column.

#include <map>
#include <string>
#include <vector>

#include "stableflow/harness/expr.hpp"

namespace stableflow {

struct ConfigValue {
  std::string text;
  int line = 0;
  int column = 0;  // 1-based column of the first character of text
  int key_column = 0;
};

class Config {
 public:
  // Throws ConfigParse on malformed lines and duplicate keys.
  static Config parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
  const ConfigValue& at(const std::string& section, const std::string& key) const;

  std::string string(const std::string& section, const std::string& key, const std::string& fallback) const;
  // Numbers accept constant expressions such as 2*pi.
  double number(const std::string& section, const std::string& key, double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  std::vector<double> numbers(const std::string& section, const std::string& key) const;
  Expr expression(const std::string& section, const std::string& key, const std::vector<std::string>& vars) const;

  const std::map<std::string, ConfigValue>& section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  // Throws ConfigParse naming the first key of `section` not in `allowed`.
  void require_known(const std::string& section, const std::vector<std::string>& allowed) const;

  [[noreturn]] static void fail(const ConfigValue& v, const std::string& msg);

 private:
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
  std::map<std::string, int> section_lines_;
};

// Splits on commas, keeping the column of each piece.
std::vector<ConfigValue> split_list(const ConfigValue& v);

}  // namespace stableflow
