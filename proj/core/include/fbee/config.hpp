#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbee/environments.hpp"
#include "fbee/explorer.hpp"
#include "fbee/fb.hpp"

namespace fbee {

/// Everything that determines a run. A run is a pure function of this value.
struct RunConfig {
  std::string name = "run";
  EnvParams env;
  FbConfig fb;
  ExplorationStrategy strategy;
  std::int64_t total_env_steps = 150000;
  std::int64_t eval_period = 5000;
  int n_eval_episodes = 30;
  int n_reward_samples = 10000;
  double train_ratio = 0.5;
  std::int64_t buffer_capacity = 1000000;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/run";
  bool checkpoint_at_eval = true;

  /// Throws std::invalid_argument naming the first offending key.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys take their defaults; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every configuration key with its default, in file order.
std::vector<ConfigKeyDoc> config_key_docs();

}  // namespace fbee
