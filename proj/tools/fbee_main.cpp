#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fbee/harness.hpp"

namespace fs = std::filesystem;
using namespace fbee;

namespace {

void print_record(const MetricsRecord& r) {
  std::cout << "step " << r.global_step << "  train_steps " << r.train_steps << "  avg_ratio " << r.average_ratio
            << "  goal_ratio " << r.goal_average_ratio << "  coverage " << r.coverage << "  loss " << r.loss.total
            << std::endl;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed,
              const std::optional<std::int64_t>& steps, const std::string& output, bool quiet) {
  auto config = apply_environment_overrides(load_run_config(config_path));
  if (seed) config.seed = *seed;
  if (steps) config.total_env_steps = *steps;
  if (!output.empty()) config.output_dir = output;
  RunOptions options;
  if (!quiet) options.on_record = print_record;
  const auto result = run(config, options);
  std::cout << "metrics: " << (fs::path(config.output_dir) / "metrics.jsonl").string() << '\n';
  if (result.checkpoint) std::cout << "checkpoint: " << result.checkpoint->string() << '\n';
  return 0;
}

int cmd_sweep(const std::vector<std::string>& config_paths, int n_seeds, const std::string& output) {
  std::vector<RunConfig> configs;
  for (const auto& p : config_paths) configs.push_back(load_run_config(p));
  const fs::path out_dir = !output.empty() ? fs::path(output)
                           : std::getenv("FBEE_OUTPUT_DIR")  ? fs::path(std::getenv("FBEE_OUTPUT_DIR"))
                                                             : fs::path("runs/sweep");
  const auto report = sweep(configs, n_seeds, out_dir, thread_count_from_environment(1));
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "sweep_report.tsv");
  write_sweep_report(out, report);
  write_sweep_report(std::cout, report);
  int failures = 0;
  for (const auto& r : report.runs) failures += r.error.has_value();
  return failures == 0 ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed) {
  const auto state = load_checkpoint(checkpoint);
  const auto tasks = task_suite(state.env);
  OptimalReturnCache cache;
  auto rng = derive_rng(seed, "cli-eval");
  const auto record = evaluate_run_state(
      state, tasks, {episodes > 0 ? episodes : state.config.n_eval_episodes, state.config.n_reward_samples}, rng,
      cache);
  std::cout << "task\tmean_return\tstd\toptimal\tratio\n";
  for (const auto& t : record.tasks) {
    std::cout << t.task << '\t' << t.mean_return << '\t' << t.std_return << '\t' << t.optimal_return << '\t'
              << t.ratio << '\n';
  }
  std::cout << "average_ratio\t" << record.average_ratio << "\ngoal_average_ratio\t" << record.goal_average_ratio
            << '\n';
  return 0;
}

int cmd_oracle_check(const std::string& checkpoint, int n_z, std::uint64_t seed) {
  const auto state = load_checkpoint(checkpoint);
  std::cout << oracle_check(state, n_z, seed).to_json().dump(2) << '\n';
  return 0;
}

int cmd_export(const std::string& metrics_dir, const std::string& output) {
  const fs::path root(metrics_dir);
  const fs::path out_dir = output.empty() ? root / "plots" : fs::path(output);
  std::size_t files = 0;
  auto export_one = [&](const fs::path& metrics, const std::string& prefix) {
    files += export_plots(metrics, out_dir, prefix).size();
  };
  if (fs::is_regular_file(root)) {
    export_one(root, "");
  } else {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.path().filename() != "metrics.jsonl") continue;
      auto rel = fs::relative(entry.path().parent_path(), root).string();
      for (auto& c : rel) {
        if (c == '/') c = '_';
      }
      export_one(entry.path(), rel == "." ? "" : rel + "_");
    }
  }
  std::cout << "wrote " << files << " curve files to " << out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward-backward representations with ensemble-driven exploration"};
  app.require_subcommand(1);

  std::string config_path, output, checkpoint, metrics_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::int64_t> steps_override;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Run one configuration; writes metrics and checkpoints");
  train->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed_override, "Override the master seed");
  train->add_option("--steps", steps_override, "Override total_env_steps");
  train->add_option("-o,--output", output, "Override output_dir");
  train->add_flag("-q,--quiet", quiet, "Do not print evaluation records");

  std::vector<std::string> sweep_configs;
  int n_seeds = 5;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run configurations over several seeds and aggregate");
  sweep_cmd->add_option("configs", sweep_configs, "JSON run configurations")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("-n,--seeds", n_seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("-o,--output", output, "Sweep output directory");

  int episodes = 0;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "Zero-shot evaluation of a checkpoint on its task suite");
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Episodes per task (default: from the config)");
  eval->add_option("--seed", seed, "Evaluation seed");

  int n_z = 32;
  auto* oracle = app.add_subcommand("oracle-check", "Compare a checkpoint with exact tabular quantities");
  oracle->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--n-z", n_z, "Number of sampled embeddings")->check(CLI::Range(2, 100000));
  oracle->add_option("--seed", seed, "Sampling seed");

  auto* plots = app.add_subcommand("export-plots", "Flatten metrics files into two-column curve files");
  plots->add_option("metrics", metrics_dir, "Metrics file or directory searched for metrics.jsonl")
      ->required()
      ->check(CLI::ExistingPath);
  plots->add_option("-o,--output", output, "Output directory (default: <metrics>/plots)");

  auto* keys = app.add_subcommand("config-keys", "List every configuration key with its default");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config_path, seed_override, steps_override, output, quiet);
    if (*sweep_cmd) return cmd_sweep(sweep_configs, n_seeds, output);
    if (*eval) return cmd_eval(checkpoint, episodes, seed);
    if (*oracle) return cmd_oracle_check(checkpoint, n_z, seed);
    if (*plots) return cmd_export(metrics_dir, output);
    if (*keys) {
      for (const auto& k : config_key_docs()) std::cout << k.key << " = " << k.default_value << "  # " << k.description << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "fbee: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
