#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace e2v {

/// Flat key/value document with `[section]` headers. Values are quoted
/// strings, numbers, true/false, or one-line arrays of those. Keys are stored
/// as "section.key".
class ConfigDocument {
 public:
  using Scalar = std::variant<std::string, double, bool>;
  using Value = std::variant<Scalar, std::vector<Scalar>>;

  static ConfigDocument parse(std::string_view text);
  static ConfigDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_number(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_numbers(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, Value> values_;
};

}  // namespace e2v
