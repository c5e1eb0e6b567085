#ifndef SSA_CONFIG_HPP_
#define SSA_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssa/errors.hpp"

namespace ssa {

// Flat dotted-key configuration. Precedence: CLI override > config file >
// built-in default. Every run writes a resolved snapshot so it can be
// reproduced from the snapshot alone.
class Config {
 public:
  enum class Source { kDefault, kFile, kOverride };

  static Config defaults();

  void load_file(const std::string& path);
  // "key=value"; ConfigError on unknown keys or bad syntax.
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value, Source source);
  bool has(const std::string& key) const;

  void write_snapshot(const std::string& path) const;

 private:
  struct Entry {
    std::string value;
    Source source = Source::kDefault;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace ssa

#endif  // SSA_CONFIG_HPP_
