#ifndef STIC_CONFIG_HPP
#define STIC_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

namespace stic {

/// Flat `key = value` configuration, `#` starts a comment. Parsing keeps
/// every key; schema owners (the trainer, the CLI) must consume the keys they
/// know and reject leftovers, so typos in option names never pass silently.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  /// Later assignments win; used for CLI overrides on top of a file.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  /// Typed getters remove the key from the unconsumed set.
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);

  /// Keys never consumed by any getter; non-empty means a typo or an option
  /// the chosen subcommand does not understand.
  std::vector<std::string> unconsumed() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::map<std::string, bool> consumed_;
};

}  // namespace stic

#endif  // STIC_CONFIG_HPP
