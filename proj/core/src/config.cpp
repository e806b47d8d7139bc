// SPDX-License-Identifier: Apache-2.0
#include <gpn/config.hpp>
#include <gpn/errors.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace gpn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string origin) {
  KeyValueConfig cfg;
  cfg.origin_ = std::move(origin);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = cfg.origin_ + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (cfg.values_.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = Entry{value, line_no};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::read_file(const std::string& path) {
  return parse(read_text_file(path), path);
}

const KeyValueConfig::Entry* KeyValueConfig::lookup(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void KeyValueConfig::bad_value(const std::string& key, const Entry& e, std::string_view expected) const {
  throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + key + "' expects " +
                    std::string(expected) + ", got '" + e.value + "'");
}

void KeyValueConfig::get(const std::string& key, std::string& out) {
  if (const Entry* e = lookup(key)) out = e->value;
}

void KeyValueConfig::get(const std::string& key, int& out) {
  if (const Entry* e = lookup(key)) {
    if (!parse_number(e->value, out)) bad_value(key, *e, "an integer");
  }
}

void KeyValueConfig::get(const std::string& key, long& out) {
  if (const Entry* e = lookup(key)) {
    if (!parse_number(e->value, out)) bad_value(key, *e, "an integer");
  }
}

void KeyValueConfig::get(const std::string& key, unsigned long& out) {
  if (const Entry* e = lookup(key)) {
    if (!parse_number(e->value, out)) bad_value(key, *e, "a non-negative integer");
  }
}

void KeyValueConfig::get(const std::string& key, double& out) {
  if (const Entry* e = lookup(key)) {
    if (!parse_number(e->value, out)) bad_value(key, *e, "a number");
  }
}

void KeyValueConfig::get(const std::string& key, bool& out) {
  if (const Entry* e = lookup(key)) {
    if (e->value == "true" || e->value == "on" || e->value == "1") {
      out = true;
    } else if (e->value == "false" || e->value == "off" || e->value == "0") {
      out = false;
    } else {
      bad_value(key, *e, "true/false");
    }
  }
}

void KeyValueConfig::get(const std::string& key, std::vector<int>& out) {
  const Entry* e = lookup(key);
  if (!e) return;
  std::vector<int> parsed;
  std::string_view rest = e->value;
  if (!rest.empty() && rest.front() == '[' && rest.back() == ']') rest = rest.substr(1, rest.size() - 2);
  while (!trim(rest).empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    int v = 0;
    if (!parse_number(item, v)) bad_value(key, *e, "a comma-separated integer list");
    parsed.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  out = std::move(parsed);
}

void KeyValueConfig::reject_unknown() const {
  for (const auto& [key, entry] : values_) {
    if (!used_.contains(key)) {
      throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw StateError("format_double: conversion failed");
  return std::string(buf, ptr);
}

KeyValueWriter& KeyValueWriter::add(std::string key, std::string value) {
  lines_.emplace_back(std::move(key), std::move(value));
  return *this;
}
KeyValueWriter& KeyValueWriter::add(std::string key, int value) { return add(std::move(key), std::to_string(value)); }
KeyValueWriter& KeyValueWriter::add(std::string key, long value) { return add(std::move(key), std::to_string(value)); }
KeyValueWriter& KeyValueWriter::add(std::string key, unsigned long value) {
  return add(std::move(key), std::to_string(value));
}
KeyValueWriter& KeyValueWriter::add(std::string key, double value) { return add(std::move(key), format_double(value)); }
KeyValueWriter& KeyValueWriter::add(std::string key, bool value) {
  return add(std::move(key), std::string(value ? "true" : "false"));
}
KeyValueWriter& KeyValueWriter::add(std::string key, const std::vector<int>& value) {
  std::string s;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(value[i]);
  }
  return add(std::move(key), s);
}

std::string KeyValueWriter::str() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
  return out;
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gpn
