#pragma once

#include <boost/property_tree/ptree.hpp>
#include <optional>
#include <string>
#include <vector>

namespace elevodom {

/// INI-style `key = value` file with optional [sections]; keys are addressed
/// as "section.key". Vector values are whitespace or comma separated.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  explicit KeyValueConfig(boost::property_tree::ptree tree) : tree_(std::move(tree)) {}

  static KeyValueConfig Load(const std::string& path);
  static KeyValueConfig Parse(const std::string& text);

  bool has(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_vector(const std::string& key, std::size_t expected_size) const;
  std::optional<std::vector<double>> find_vector(const std::string& key) const;

  /// Keys of a section in file order.
  std::vector<std::string> keys(const std::string& section) const;

  void set(const std::string& key, const std::string& value);
  void save(const std::string& path) const;
  std::string to_string() const;

 private:
  boost::property_tree::ptree tree_;
};

std::string format_vector(const double* values, std::size_t n);

}  // namespace elevodom
