#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbee/checkpoint.hpp"
#include "fbee/config.hpp"
#include "fbee/metrics.hpp"
#include "fbee/uncertainty.hpp"
#include "fbee/zeroshot.hpp"

namespace fbee {

struct RunOptions {
  /// Write metrics, timing and checkpoint files under config.output_dir.
  bool write_files = true;
  std::function<void(const MetricsRecord&)> on_record;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  std::optional<std::filesystem::path> checkpoint;
};

/// Zero-shot evaluation of every task at the current state of a run. The
/// state is not modified; `rng` drives reward relabeling and rollouts.
MetricsRecord evaluate_run_state(const RunState& state, const std::vector<Task>& tasks,
                                 const ZeroShotOptions& options, Rng& rng, OptimalReturnCache& cache);

/// The outer exploration loop: evaluate at step 0, then alternate
/// eval_period environment steps (with interleaved training) and an
/// evaluation until total_env_steps. Files written under output_dir:
/// metrics.jsonl (records), timing.jsonl (wall-clock), checkpoint.bin.
/// A non-finite loss saves abort.bin and rethrows.
RunResult run(const RunConfig& config, const RunOptions& options = {});

/// Continues a run from a checkpointed state.
RunResult resume(RunState state, const RunOptions& options = {});

struct SweepRun {
  std::string name;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::vector<MetricsRecord> records;
  std::optional<std::string> error;
};

struct SweepReport {
  std::vector<SweepRun> runs;
  /// Per config name: bands of average ratio, goal ratio and coverage.
  struct Group {
    std::string name;
    CurveBand average_ratio;
    CurveBand goal_ratio;
    CurveBand coverage;
  };
  std::vector<Group> groups;
};

/// Runs every config with seeds config.seed + i for i < n_seeds, each in
/// <out_dir>/<name>/seed_<seed>. Failed runs are recorded and skipped. Runs
/// execute on up to `threads` worker threads.
SweepReport sweep(const std::vector<RunConfig>& configs, int n_seeds, const std::filesystem::path& out_dir,
                  int threads = 1);

/// Groups finished runs by name into mean/std bands.
std::vector<SweepReport::Group> aggregate_runs(const std::vector<SweepRun>& runs);

/// Plot-ready columns: name, step, n, then mean and std of each band.
void write_sweep_report(std::ostream& out, const SweepReport& report);

struct OracleCheckReport {
  std::vector<double> q_relative_error;
  std::vector<double> q_rank_correlation;
  std::vector<double> measure_relative_error;
  std::vector<double> learned_row_mass;  // mean over (s, a) of sum_s' <F, B(s')> rho(s')
  double exact_row_mass = 0.0;
  FQCorrelation correlation;

  nlohmann::json to_json() const;
};

/// Compares the learned factorization with exact tabular quantities for
/// n_z sphere-sampled embeddings: Q-estimates <F_mean(s,a,z), z> against
/// the exact Q of the greedy policy pi_z under reward <B(s'), z>, and
/// <F_mean, B(s')> rho(s') against that policy's successor measure, where rho
/// is the buffer's next-state distribution (uniform when empty).
OracleCheckReport oracle_check(const RunState& state, int n_z, std::uint64_t seed);

/// FBEE_OUTPUT_DIR, when set, replaces config.output_dir.
RunConfig apply_environment_overrides(RunConfig config);
/// FBEE_THREADS, when set and positive; otherwise `fallback`.
int thread_count_from_environment(int fallback);

}  // namespace fbee
