#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cq {

/** Bad key, bad value, or an unreadable file.  Maps to exit code 2. */
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/**
 * Flat `key = value` configuration, one namespace, no sections.  `#` starts
 * a comment (whole line or trailing), blank lines are skipped, duplicate
 * keys are an error.  Values keep their literal spelling; typed access
 * parses on demand and rejects trailing garbage.
 */
class Config {
 public:
  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value, got '" + line + "'");
      std::string key = detail::trim(line.substr(0, eq));
      std::string val = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (!c.kv_.emplace(key, val).second)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
    }
    return c;
  }

  static Config load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  long get_int(const std::string& key) const { return parse_int(key, get_string(key)); }
  long get_int(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  double get_double(const std::string& key) const {
    return parse_num(key, get_string(key));
  }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }

  bool get_bool(const std::string& key) const {
    std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
  }
  bool get_bool(const std::string& key, bool dflt) const {
    return has(key) ? get_bool(key) : dflt;
  }

  std::vector<long> get_int_list(const std::string& key) const {
    std::vector<long> out;
    for (const std::string& tok : split(get_string(key)))
      out.push_back(parse_int(key, tok));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split(get_string(key)))
      out.push_back(parse_num(key, tok));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
  }
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& dflt) const {
    return has(key) ? get_double_list(key) : dflt;
  }

  /** Rejects any key outside `allowed`; runs before any computation so a
   * misspelled key can never silently fall back to a default. */
  void require_known(const std::set<std::string>& allowed) const {
    std::string bad;
    for (const auto& [k, v] : kv_)
      if (allowed.count(k) == 0) bad += (bad.empty() ? "" : ", ") + k;
    if (!bad.empty())
      throw ConfigError("unknown config key(s): " + bad);
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) out.push_back(detail::trim(cur));
    return out;
  }

  // Plain decimal, or an exactly-integral float spelling such as 2e7.
  static long parse_int(const std::string& key, const std::string& tok) {
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc() && p == tok.data() + tok.size()) return v;
    double d = parse_num(key, tok);
    long r = static_cast<long>(d);
    if (static_cast<double>(r) != d)
      throw ConfigError("key '" + key + "': expected integer, got '" + tok + "'");
    return r;
  }

  static double parse_num(const std::string& key, const std::string& tok) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw ConfigError("key '" + key + "': expected number, got '" + tok + "'");
    return v;
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace cq
