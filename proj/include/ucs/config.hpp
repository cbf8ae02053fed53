#pragma once

#include "ucs/harness.hpp"

#include <map>
#include <string>
#include <vector>

namespace ucs {

/// Plain-text `key = value` configuration with `#` comments. Unknown keys are
/// hard errors. CLI `--set key=value` overrides win over file values.
struct ConfigMap {
  std::map<std::string, std::string> values;

  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_text(const std::string& text);
  void apply_overrides(const std::vector<std::string>& kv_pairs);
};

/// Validates keys and builds the experiment spec (defaults merged).
ExperimentSpec build_spec(const ConfigMap& cfg);

/// Serializes the effective, defaults-merged spec back to config text.
std::string dump_spec(const ExperimentSpec& spec);

}  // namespace ucs
