#include "e2v/config.hpp"

#include "e2v/error.hpp"
#include "e2v/io.hpp"

#include <charconv>
#include <cmath>

namespace e2v {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

ConfigDocument::Scalar parse_scalar(std::string_view s, std::size_t line_no) {
  s = trim(s);
  if (s.empty()) fail(line_no, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line_no, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char c = s[++i];
        out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(line_no, "cannot parse value '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_array(std::string_view body, std::size_t line_no) {
  std::vector<std::string_view> parts;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '"' && (i == 0 || body[i - 1] != '\\')) quoted = !quoted;
    if (body[i] == ',' && !quoted) {
      parts.push_back(body.substr(start, i - start));
      start = i + 1;
    }
  }
  if (quoted) fail(line_no, "unterminated string in array");
  parts.push_back(body.substr(start));
  if (!parts.empty() && trim(parts.back()).empty()) parts.pop_back();  // trailing comma
  return parts;
}

std::string type_error(const std::string& key, const char* want) {
  return "config key '" + key + "' must be " + want;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text) {
  ConfigDocument doc;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++line_no;
    const std::string_view line = trim(strip_comment(text.substr(pos, end - pos)));
    pos = end + 1;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const std::string key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) fail(line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (doc.values_.contains(full)) fail(line_no, "duplicate key '" + full + "'");
    const std::string_view raw = trim(line.substr(eq + 1));
    if (!raw.empty() && raw.front() == '[') {
      if (raw.back() != ']') fail(line_no, "arrays must close on the same line");
      std::vector<Scalar> items;
      for (auto part : split_array(raw.substr(1, raw.size() - 2), line_no)) items.push_back(parse_scalar(part, line_no));
      doc.values_[full] = std::move(items);
    } else {
      doc.values_[full] = parse_scalar(raw, line_no);
    }
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse(io::read_file(path));
}

std::string ConfigDocument::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto* s = std::get_if<Scalar>(&it->second);
  if (!s || !std::holds_alternative<std::string>(*s)) throw ConfigError(type_error(key, "a string"));
  return std::get<std::string>(*s);
}

double ConfigDocument::get_number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto* s = std::get_if<Scalar>(&it->second);
  if (!s || !std::holds_alternative<double>(*s)) throw ConfigError(type_error(key, "a number"));
  return std::get<double>(*s);
}

int ConfigDocument::get_int(const std::string& key, int fallback) const {
  const double v = get_number(key, fallback);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(type_error(key, "an integer"));
  return static_cast<int>(v);
}

bool ConfigDocument::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto* s = std::get_if<Scalar>(&it->second);
  if (!s || !std::holds_alternative<bool>(*s)) throw ConfigError(type_error(key, "true or false"));
  return std::get<bool>(*s);
}

std::vector<double> ConfigDocument::get_numbers(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto* arr = std::get_if<std::vector<Scalar>>(&it->second);
  if (!arr) throw ConfigError(type_error(key, "an array of numbers"));
  std::vector<double> out;
  for (const auto& s : *arr) {
    if (!std::holds_alternative<double>(s)) throw ConfigError(type_error(key, "an array of numbers"));
    out.push_back(std::get<double>(s));
  }
  return out;
}

std::vector<std::string> ConfigDocument::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto* arr = std::get_if<std::vector<Scalar>>(&it->second);
  if (!arr) throw ConfigError(type_error(key, "an array of strings"));
  std::vector<std::string> out;
  for (const auto& s : *arr) {
    if (!std::holds_alternative<std::string>(s)) throw ConfigError(type_error(key, "an array of strings"));
    out.push_back(std::get<std::string>(s));
  }
  return out;
}

std::vector<std::string> ConfigDocument::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace e2v
