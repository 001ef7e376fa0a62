#pragma once

#include <filesystem>
#include <iosfwd>

#include "fbee/config.hpp"
#include "fbee/environments.hpp"
#include "fbee/explorer.hpp"
#include "fbee/fb.hpp"
#include "fbee/replay_buffer.hpp"

namespace fbee {

/// Complete mutable state of a run: enough to resume it bit-for-bit.
struct RunState {
  RunConfig config;
  Environment env;
  FbEnsemble ensemble;
  ReplayBuffer buffer;
  CollectionState collection;
  Rng explore_rng;
  Rng train_rng;

  /// Initial state for a config; every generator derives from config.seed.
  static RunState fresh(const RunConfig& config);
};

/// Versioned binary container: config, all networks, targets, Adam states,
/// generator states, counters, collection log and replay buffer.
void write_checkpoint(std::ostream& out, const RunState& state);
RunState read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const RunState& state);
RunState load_checkpoint(const std::filesystem::path& path);

void write_ensemble(BinaryWriter& out, const FbEnsemble& ensemble);
/// Overwrites the parameters and optimizer state of a structurally matching
/// ensemble.
void read_ensemble(BinaryReader& in, FbEnsemble& ensemble);

}  // namespace fbee
