#include "elevodom/key_value_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "elevodom/error.hpp"

namespace elevodom {

namespace pt = boost::property_tree;

KeyValueConfig KeyValueConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Parse(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

KeyValueConfig KeyValueConfig::Parse(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kFormat, std::string("config parse error: ") + e.what());
  }
  return KeyValueConfig(std::move(tree));
}

bool KeyValueConfig::has(const std::string& key) const {
  return static_cast<bool>(tree_.get_optional<std::string>(key));
}

namespace {

double parse_double(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || text.find_first_not_of(" \t", pos) != std::string::npos) {
    throw Error(ErrorCode::kFormat, "config key '" + key + "': not a number: '" + text + "'");
  }
  return value;
}

}  // namespace

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = tree_.get_optional<std::string>(key);
  return v ? parse_double(key, *v) : fallback;
}

double KeyValueConfig::require_double(const std::string& key) const {
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) throw Error(ErrorCode::kFormat, "config key '" + key + "' is missing");
  return parse_double(key, *v);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::kFormat, "config key '" + key + "': not an integer: '" + *v + "'");
  }
  return out;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return tree_.get<std::string>(key, fallback);
}

std::optional<std::vector<double>> KeyValueConfig::find_vector(const std::string& key) const {
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return std::nullopt;
  std::string text = *v;
  for (char& c : text) {
    if (c == ',' || c == ';') c = ' ';
  }
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(key, tok));
  return out;
}

std::vector<double> KeyValueConfig::get_vector(const std::string& key, std::size_t expected_size) const {
  auto v = find_vector(key);
  if (!v) throw Error(ErrorCode::kFormat, "config key '" + key + "' is missing");
  if (v->size() != expected_size) {
    throw Error(ErrorCode::kFormat, "config key '" + key + "': expected " +
                                        std::to_string(expected_size) + " values");
  }
  return *v;
}

std::vector<std::string> KeyValueConfig::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto child = tree_.get_child_optional(section);
  if (!child) return out;
  for (const auto& [name, node] : *child) out.push_back(name);
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  tree_.put(key, value);
}

void KeyValueConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out << to_string();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  pt::ini_parser::write_ini(out, tree_);
  return out.str();
}

std::string format_vector(const double* values, std::size_t n) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    // Shortest text that round-trips exactly.
    const auto res = std::to_chars(buf, buf + sizeof(buf), values[i]);
    if (i) out += ' ';
    out.append(buf, res.ptr);
  }
  return out;
}

}  // namespace elevodom
