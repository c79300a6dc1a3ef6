#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gldm/train.hpp"

namespace gldm {
inline namespace GLDM_ABI {

/// Flat `key = value` configuration. Defaults come first, then a config file,
/// then command-line overrides; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  /// Reads `key = value` lines; `#` starts a comment.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  /// `key=value`.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  /// Throws ConfigError listing every problem found so far (unknown keys,
  /// malformed lines, invalid values).
  void validate() const;

  ModelConfig model() const;
  DataConfig data() const;
  LossConfig loss() const;
  TrainConfig train() const;
  std::string train_split() const { return get("data.train_split"); }
  std::string test_split() const { return get("data.test_split"); }

  /// Every key in sorted order, one `key = value` per line.
  std::string resolved_text() const;
  /// Hash of the resolved configuration minus run-length and cadence keys.
  std::uint64_t hash() const;

  static std::vector<std::string> known_keys();

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> errors_;
};

}  // namespace GLDM_ABI
}  // namespace gldm
