#include "stic/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stic {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not `key = value`: '" + stripped + "'");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config: empty key on line " + std::to_string(line_no));
    }
    config.set(key, value);
  }
  return config;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse(buffer.str());
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
  consumed_[key] = false;
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_[key] = true;
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_[key] = true;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + it->second +
                                "'");
  }
}

int Config::get_int(const std::string& key, int fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_[key] = true;
  try {
    std::size_t used = 0;
    int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" +
                                it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_[key] = true;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> Config::unconsumed() const {
  std::vector<std::string> keys;
  for (const auto& [key, done] : consumed_) {
    if (!done) keys.push_back(key);
  }
  return keys;
}

}  // namespace stic
