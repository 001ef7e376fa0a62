#include "fbee/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "fbee/oracle.hpp"

namespace fbee {

MetricsRecord evaluate_run_state(const RunState& state, const std::vector<Task>& tasks,
                                 const ZeroShotOptions& options, Rng& rng, OptimalReturnCache& cache) {
  MetricsRecord record;
  record.global_step = state.collection.global_step;
  record.train_steps = state.ensemble.train_steps();
  record.coverage = state.collection.coverage();
  double ratio_sum = 0.0, goal_sum = 0.0;
  int goals = 0;
  for (const auto& task : tasks) {
    const auto result =
        evaluate_zero_shot(state.env, state.ensemble, state.ensemble, state.buffer, task, options, rng, &cache);
    TaskScore score{result.task,       task.kind == TaskKind::Goal, result.mean_return,
                    result.std_return, result.mean_undiscounted,    result.optimal_return,
                    result.ratio,      result.zero_reward,          result.ratio_by_convention};
    ratio_sum += score.ratio;
    if (score.goal) {
      goal_sum += score.ratio;
      ++goals;
    }
    record.tasks.push_back(std::move(score));
  }
  if (!tasks.empty()) record.average_ratio = ratio_sum / static_cast<double>(tasks.size());
  record.goal_average_ratio = goals > 0 ? goal_sum / goals : record.average_ratio;
  return record;
}

namespace {

nlohmann::json zero_shot_line(std::int64_t step, const TaskScore& score) {
  nlohmann::json line = score;
  line["kind"] = "zero_shot";
  line["global_step"] = step;
  return line;
}

nlohmann::json exploration_line(const ZLogEntry& z) {
  return {{"kind", "exploration"}, {"global_step", z.global_step}, {"episode", z.episode},
          {"z_norm", z.z_norm},    {"score", z.score},             {"coverage", z.coverage},
          {"fallback", z.fallback}};
}

LossSummary average_loss(const TrainStepReport& report) {
  LossSummary loss;
  for (const auto& m : report.members) {
    loss.td += m.td;
    loss.attraction += m.attraction;
    loss.ortho += m.ortho;
    loss.total += m.total;
  }
  const auto k = static_cast<double>(report.members.size());
  loss.td /= k;
  loss.attraction /= k;
  loss.ortho /= k;
  loss.total /= k;
  return loss;
}

}  // namespace

RunResult resume(RunState state, const RunOptions& options) {
  const auto& config = state.config;
  const auto tasks = task_suite(state.env);
  const ZeroShotOptions eval_options{config.n_eval_episodes, config.n_reward_samples};
  const std::filesystem::path out_dir = config.output_dir;
  const bool fresh_start = state.collection.global_step == 0;

  std::optional<MetricsWriter> metrics, timing;
  if (options.write_files) {
    std::filesystem::create_directories(out_dir);
    metrics.emplace(out_dir / "metrics.jsonl", !fresh_start);
    timing.emplace(out_dir / "timing.jsonl", !fresh_start);
  }
  const auto started = std::chrono::steady_clock::now();
  OptimalReturnCache cache;
  RunResult result;
  LossSummary last_loss;
  std::size_t logged_z = state.collection.z_log.size();

  auto emit = [&](MetricsRecord record) {
    double score_sum = 0.0;
    for (std::size_t i = logged_z; i < state.collection.z_log.size(); ++i) {
      score_sum += state.collection.z_log[i].score;
      if (metrics) metrics->write(exploration_line(state.collection.z_log[i]));
    }
    record.z_selections = static_cast<std::int64_t>(state.collection.z_log.size() - logged_z);
    record.mean_z_score = record.z_selections > 0 ? score_sum / static_cast<double>(record.z_selections) : 0.0;
    logged_z = state.collection.z_log.size();
    record.loss = last_loss;
    if (metrics) {
      for (const auto& task : record.tasks) metrics->write(zero_shot_line(record.global_step, task));
      metrics->write(record);
    }
    if (timing) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
      timing->write({{"global_step", record.global_step},
                     {"train_steps", record.train_steps},
                     {"wall_clock_seconds", elapsed.count()}});
    }
    if (options.on_record) options.on_record(record);
    result.records.push_back(std::move(record));
  };
  auto evaluate = [&] {
    auto rng = derive_rng(config.seed, "eval/" + std::to_string(state.collection.global_step));
    emit(evaluate_run_state(state, tasks, eval_options, rng, cache));
    if (options.write_files && config.checkpoint_at_eval) {
      save_checkpoint(out_dir / "checkpoint.bin", state);
      result.checkpoint = out_dir / "checkpoint.bin";
    }
  };

  if (fresh_start) evaluate();
  const auto train_hook = [&](std::int64_t) {
    const auto report = train_step(state.ensemble, state.buffer, state.train_rng);
    if (!report.skipped) last_loss = average_loss(report);
  };
  while (state.collection.global_step < config.total_env_steps) {
    const auto step = state.collection.global_step;
    const auto next = std::min(config.total_env_steps, (step / config.eval_period + 1) * config.eval_period);
    try {
      collect(state.env.mdp, state.env.episode, state.ensemble, config.strategy, state.buffer, state.collection,
              state.explore_rng, next - step, config.train_ratio, train_hook);
    } catch (const nn::NonFiniteError& e) {
      if (options.write_files) save_checkpoint(out_dir / "abort.bin", state);
      throw nn::NonFiniteError(std::string(e.what()) + " at environment step " +
                               std::to_string(state.collection.global_step) + "; state saved to abort.bin");
    }
    evaluate();
  }
  if (options.write_files) {
    save_checkpoint(out_dir / "checkpoint.bin", state);
    result.checkpoint = out_dir / "checkpoint.bin";
  }
  return result;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  return resume(RunState::fresh(config), options);
}

std::vector<SweepReport::Group> aggregate_runs(const std::vector<SweepRun>& runs) {
  std::map<std::string, std::vector<std::vector<MetricsRecord>>> by_name;
  std::vector<std::string> order;
  for (const auto& run : runs) {
    if (run.error) continue;
    if (!by_name.count(run.name)) order.push_back(run.name);
    by_name[run.name].push_back(run.records);
  }
  std::vector<SweepReport::Group> groups;
  for (const auto& name : order) {
    const auto& records = by_name.at(name);
    groups.push_back({name, aggregate(records, metric_average_ratio), aggregate(records, metric_goal_ratio),
                      aggregate(records, metric_coverage)});
  }
  return groups;
}

SweepReport sweep(const std::vector<RunConfig>& configs, int n_seeds, const std::filesystem::path& out_dir,
                  int threads) {
  if (configs.empty()) throw std::invalid_argument("sweep: no configs");
  if (n_seeds < 1) throw std::invalid_argument("sweep: n_seeds must be >= 1");
  SweepReport report;
  std::vector<RunConfig> jobs;
  for (const auto& config : configs) {
    for (int i = 0; i < n_seeds; ++i) {
      RunConfig job = config;
      job.seed = config.seed + static_cast<std::uint64_t>(i);
      job.output_dir = (out_dir / config.name / ("seed_" + std::to_string(job.seed))).string();
      jobs.push_back(job);
      report.runs.push_back({job.name, job.seed, job.output_dir, {}, std::nullopt});
    }
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        report.runs[i].records = run(jobs[i]).records;
      } catch (const std::exception& e) {
        report.runs[i].error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  report.groups = aggregate_runs(report.runs);
  return report;
}

void write_sweep_report(std::ostream& out, const SweepReport& report) {
  out.precision(10);
  out << "# name\tstep\tn\tavg_ratio_mean\tavg_ratio_std\tgoal_ratio_mean\tgoal_ratio_std\tcoverage_mean\tcoverage_std\n";
  for (const auto& g : report.groups) {
    for (std::size_t i = 0; i < g.average_ratio.steps.size(); ++i) {
      out << g.name << '\t' << g.average_ratio.steps[i] << '\t' << g.average_ratio.n[i] << '\t'
          << g.average_ratio.mean[i] << '\t' << g.average_ratio.std[i] << '\t' << g.goal_ratio.mean[i] << '\t'
          << g.goal_ratio.std[i] << '\t' << g.coverage.mean[i] << '\t' << g.coverage.std[i] << '\n';
    }
  }
  for (const auto& run : report.runs) {
    if (run.error) out << "# failed\t" << run.name << "\tseed " << run.seed << '\t' << *run.error << '\n';
  }
}

nlohmann::json OracleCheckReport::to_json() const {
  auto summary = [](const std::vector<double>& v) {
    return nlohmann::json{{"values", v}, {"mean", v.empty() ? 0.0 : mean(v)}};
  };
  return {{"q_relative_error", summary(q_relative_error)},
          {"q_rank_correlation", summary(q_rank_correlation)},
          {"measure_relative_error", summary(measure_relative_error)},
          {"learned_row_mass", summary(learned_row_mass)},
          {"exact_row_mass", exact_row_mass},
          {"f_q_r_squared", correlation.r_squared},
          {"f_q_degenerate", correlation.degenerate},
          {"f_q_traces", correlation.traces},
          {"f_q_variances", correlation.q_variances}};
}

OracleCheckReport oracle_check(const RunState& state, int n_z, std::uint64_t seed) {
  if (n_z < 2) throw std::invalid_argument("oracle_check: n_z must be >= 2");
  const auto& mdp = state.env.mdp;
  const auto& ensemble = state.ensemble;
  const int S = mdp.n_states(), A = mdp.n_actions(), d = ensemble.embedding_dim();

  Eigen::VectorXd rho = Eigen::VectorXd::Constant(S, 1.0 / S);
  if (!state.buffer.empty()) {
    rho.setZero();
    for (std::size_t i = 0; i < state.buffer.size(); ++i) rho(state.buffer[i].next_state) += 1.0;
    rho /= static_cast<double>(state.buffer.size());
  }
  std::vector<StateId> states(static_cast<std::size_t>(S));
  std::iota(states.begin(), states.end(), 0);
  const Eigen::MatrixXd b_all = ensemble.backward(states);

  OracleCheckReport report;
  report.exact_row_mass = 1.0 / (1.0 - mdp.gamma());
  auto rng = derive_rng(seed, "oracle-check");
  std::vector<Eigen::VectorXd> zs;
  for (int i = 0; i < n_z; ++i) {
    const Eigen::VectorXd z = sample_z_sphere(d, rng);
    zs.push_back(z);
    const Eigen::MatrixXd f = ensemble_mean(ensemble.forward_all_actions(states, z));
    std::vector<ActionId> greedy(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) greedy[s] = greedy_action(f.middleCols(s * A, A), z);
    const auto measure = exact_successor_measure(mdp, TabularPolicy::deterministic(greedy, A)).state_marginal();

    const Eigen::VectorXd reward = b_all.transpose() * z;
    const Eigen::VectorXd q_exact = measure * reward;
    const Eigen::VectorXd q_hat = f.transpose() * z;
    report.q_relative_error.push_back((q_hat - q_exact).norm() / std::max(q_exact.norm(), 1e-12));
    const std::vector<double> a(q_hat.data(), q_hat.data() + q_hat.size());
    const std::vector<double> b(q_exact.data(), q_exact.data() + q_exact.size());
    report.q_rank_correlation.push_back(spearman(a, b));

    const Eigen::MatrixXd learned = (f.transpose() * b_all) * rho.asDiagonal();
    report.measure_relative_error.push_back((learned - measure).norm() / std::max(measure.norm(), 1e-12));
    report.learned_row_mass.push_back(learned.rowwise().sum().mean());
  }
  if (ensemble.ensemble_size() >= 2) {
    std::vector<std::pair<StateId, ActionId>> pairs;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) pairs.emplace_back(s, a);
    }
    report.correlation = f_q_correlation(ensemble, zs, pairs);
  }
  return report;
}

RunConfig apply_environment_overrides(RunConfig config) {
  if (const char* dir = std::getenv("FBEE_OUTPUT_DIR"); dir && *dir) config.output_dir = dir;
  return config;
}

int thread_count_from_environment(int fallback) {
  if (const char* value = std::getenv("FBEE_THREADS"); value && *value) {
    try {
      const int n = std::stoi(value);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("FBEE_THREADS must be a positive integer, got ") + value);
  }
  return fallback;
}

}  // namespace fbee
