#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fgp/error.hpp"

namespace fgp::cli {

/// INI sections [problem] [solver] [backtest] [data] [smooth] [simulate]
/// [stability]; "section.key=value" overrides replace file keys.
class Config {
public:
  Config() = default;

  static Config load(const std::string &path) {
    Config c;
    c.path_ = path;
    if (!path.empty()) {
      try {
        boost::property_tree::ini_parser::read_ini(path, c.tree_);
      } catch (const boost::property_tree::ini_parser_error &e) {
        throw InputError(e.what());
      }
    }
    return c;
  }

  void override_key(const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || assignment.find('.') > eq) {
      throw InputError("override '" + assignment + "' is not section.key=value");
    }
    tree_.put(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  void set(const std::string &key, const std::string &value) { tree_.put(key, value); }

  bool has(const std::string &key) const {
    return static_cast<bool>(tree_.get_optional<std::string>(key));
  }

  std::string str(const std::string &key, const std::string &def) const {
    return tree_.get<std::string>(key, def);
  }

  std::string require(const std::string &key) const {
    auto v = tree_.get_optional<std::string>(key);
    if (!v || v->empty()) {
      throw InputError(where() + "missing key " + key);
    }
    return *v;
  }

  template <typename T> T get(const std::string &key, T def) const {
    const auto raw = tree_.get_optional<std::string>(key);
    if (!raw) {
      return def;
    }
    // get(key, def) would swallow a bad value and return def
    const auto v = tree_.get_optional<T>(key);
    if (!v) {
      throw InputError(where() + "bad value for " + key + ": '" + *raw + "'");
    }
    return *v;
  }

  bool flag(const std::string &key, bool def) const {
    const std::string v = str(key, def ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") {
      return true;
    }
    if (v == "false" || v == "0" || v == "no") {
      return false;
    }
    throw InputError(where() + "bad boolean for " + key + ": '" + v + "'");
  }

  std::vector<double> numbers(const std::string &key, std::vector<double> def) const {
    if (!has(key)) {
      return def;
    }
    std::vector<double> out;
    for (const auto &s : words(key)) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(s, &used));
        if (used != s.size()) {
          throw std::invalid_argument(s);
        }
      } catch (const std::exception &) {
        throw InputError(where() + "bad number '" + s + "' in " + key);
      }
    }
    return out;
  }

  /// Comma separated list.
  std::vector<std::string> words(const std::string &key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      if (a != std::string::npos) {
        out.push_back(item.substr(a, b - a + 1));
      }
    }
    return out;
  }

  const std::string &path() const { return path_; }
  const boost::property_tree::ptree &tree() const { return tree_; }

  std::string dump() const {
    std::ostringstream os;
    boost::property_tree::ini_parser::write_ini(os, tree_);
    return os.str();
  }

private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  std::string path_;
  boost::property_tree::ptree tree_;
};

} // namespace fgp::cli
