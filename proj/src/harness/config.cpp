#include "stableflow/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace stableflow {

namespace {

bool blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Trims [b, e) in place.
void trim(const std::string& s, size_t& b, size_t& e) {
  while (b < e && blank(s[b])) ++b;
  while (e > b && blank(s[e - 1])) --e;
}

[[noreturn]] void fail_at(int line, int column, const std::string& msg) {
  throw Error(ErrorCode::ConfigParse, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

}  // namespace

void Config::fail(const ConfigValue& v, const std::string& msg) { fail_at(v.line, v.column, msg); }

Config Config::parse(const std::string& text) {
  Config cfg;
  std::string current;
  cfg.sections_[current];
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (line == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.replace(0, 3, "   ");
    size_t cut = raw.find_first_of("#;");
    size_t b = 0, e = cut == std::string::npos ? raw.size() : cut;
    trim(raw, b, e);
    if (b == e) continue;
    if (raw[b] == '[') {
      if (raw[e - 1] != ']') fail_at(line, static_cast<int>(e), "expected ']'");
      size_t nb = b + 1, ne = e - 1;
      trim(raw, nb, ne);
      if (nb == ne) fail_at(line, static_cast<int>(b + 2), "empty section name");
      current = raw.substr(nb, ne - nb);
      if (cfg.section_lines_.count(current)) fail_at(line, static_cast<int>(nb + 1), "duplicate section [" + current + "]");
      cfg.section_lines_[current] = line;
      cfg.sections_[current];
      continue;
    }
    size_t eq = raw.find('=', b);
    if (eq == std::string::npos || eq >= e) fail_at(line, static_cast<int>(b + 1), "expected 'key = value'");
    size_t kb = b, ke = eq;
    trim(raw, kb, ke);
    if (kb == ke) fail_at(line, static_cast<int>(b + 1), "missing key");
    for (size_t i = kb; i < ke; ++i) {
      char c = raw[i];
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
        fail_at(line, static_cast<int>(i + 1), std::string("invalid character '") + c + "' in key");
    }
    size_t vb = eq + 1, ve = e;
    trim(raw, vb, ve);
    if (vb == ve) fail_at(line, static_cast<int>(eq + 2), "missing value");
    std::string key = raw.substr(kb, ke - kb);
    auto& sec = cfg.sections_[current];
    if (sec.count(key)) fail_at(line, static_cast<int>(kb + 1), "duplicate key '" + key + "'");
    sec[key] = ConfigValue{raw.substr(vb, ve - vb), line, static_cast<int>(vb + 1), static_cast<int>(kb + 1)};
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key);
}

const ConfigValue& Config::at(const std::string& section, const std::string& key) const {
  if (!has(section, key)) {
    auto it = section_lines_.find(section);
    int line = it == section_lines_.end() ? 0 : it->second;
    fail_at(line, 1, "missing key '" + key + "' in [" + section + "]");
  }
  return sections_.at(section).at(key);
}

std::string Config::string(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? at(section, key).text : fallback;
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  Expr e = expression(section, key, {});
  return e.constant();
}

int Config::integer(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  double v = number(section, key, 0);
  if (v != std::round(v) || std::abs(v) > 1e9) fail(at(section, key), "expected an integer");
  return static_cast<int>(v);
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const ConfigValue& piece : split_list(at(section, key))) {
    Expr e = Expr::parse(piece.text, {}, piece.line, piece.column);
    out.push_back(e.constant());
  }
  return out;
}

Expr Config::expression(const std::string& section, const std::string& key, const std::vector<std::string>& vars) const {
  const ConfigValue& v = at(section, key);
  return Expr::parse(v.text, vars, v.line, v.column);
}

const std::map<std::string, ConfigValue>& Config::section(const std::string& name) const {
  static const std::map<std::string, ConfigValue> empty;
  auto it = sections_.find(name);
  return it == sections_.end() ? empty : it->second;
}

std::vector<std::string> Config::section_names() const {
  std::vector<std::string> names;
  for (const auto& [name, keys] : sections_)
    if (!name.empty() || !keys.empty()) names.push_back(name);
  return names;
}

void Config::require_known(const std::string& section, const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : this->section(section))
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail_at(value.line, value.key_column, "unknown key '" + key + "' in [" + section + "]");
}

std::vector<ConfigValue> split_list(const ConfigValue& v) {
  std::vector<ConfigValue> out;
  size_t start = 0;
  const std::string& s = v.text;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] != ',') continue;
    size_t b = start, e = i;
    trim(s, b, e);
    if (b == e) Config::fail(ConfigValue{s, v.line, v.column + static_cast<int>(start), v.key_column}, "empty list entry");
    out.push_back(ConfigValue{s.substr(b, e - b), v.line, v.column + static_cast<int>(b), v.key_column});
    start = i + 1;
  }
  return out;
}

}  // namespace stableflow
