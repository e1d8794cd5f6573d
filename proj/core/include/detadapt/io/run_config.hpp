#pragma once

// Run configuration: a single JSON document. Every section is optional and
// falls back to the library defaults; unknown keys and ill-typed values are
// ConfigErrors naming the offending key path.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "detadapt/simulator.hpp"

namespace detadapt::io {

// Where test-time self-training starts from.
enum class StartPoint {
  source,  // the correction a source-domain fit converges to (exact at shift 0)
  zero,
  explicit_value,
};

struct RunConfig {
  SimulationConfig simulation;
  StartPoint self_train_start = StartPoint::source;
  std::optional<ParamVector> self_train_initial;  // for explicit_value
  std::optional<std::string> stages;              // default stage list for `simulate`
  bool tta = false;                               // default --tta for `simulate`
  std::optional<std::filesystem::path> output;

  std::uint64_t seed() const { return simulation.seed; }
  void set_seed(std::uint64_t seed);  // propagates into every nested config
  ParamVector initial_correction() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace detadapt::io
