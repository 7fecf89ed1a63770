#pragma once

// Flat "key = value" files with [section] headers. Keys are addressed as
// "section.key"; command-line overrides replace file values.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "error.hpp"
#include "text.hpp"

namespace consensus {

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config c;
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorKind::config, std::string("config: ") + e.what());
    }
    return c;
  }

  static Config from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return tree_.get_child_optional(key).has_value(); }

  std::optional<std::string> raw(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      return parse_double(*v);
    } catch (const Error&) {
      fail(ErrorKind::config, "config: " + key + " is not a number: " + *v);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      return parse_integer(*v);
    } catch (const Error&) {
      fail(ErrorKind::config, "config: " + key + " is not an integer: " + *v);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    const auto t = to_lower(*v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    fail(ErrorKind::config, "config: " + key + " is not a boolean: " + *v);
  }

  void set(const std::string& key, const std::string& value) {
    require(key.find('.') != std::string::npos, ErrorKind::config, "config keys need a section: " + key);
    tree_.put(key, value);
  }

  void write(std::ostream& out) const { boost::property_tree::ini_parser::write_ini(out, tree_); }

  std::string str() const {
    std::ostringstream out;
    write(out);
    return out.str();
  }

 private:
  boost::property_tree::ptree tree_;
};

}  // namespace consensus
