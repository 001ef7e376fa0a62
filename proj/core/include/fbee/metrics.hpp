#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fbee {

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);
double median(std::vector<double> values);
/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct TaskScore {
  std::string task;
  bool goal = false;
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_undiscounted = 0.0;
  double optimal_return = 0.0;
  double ratio = 0.0;
  bool zero_reward = false;
  bool ratio_by_convention = false;
};

struct LossSummary {
  double td = 0.0;
  double attraction = 0.0;
  double ortho = 0.0;
  double total = 0.0;
};

struct MetricsRecord {
  std::int64_t global_step = 0;
  std::int64_t train_steps = 0;
  std::vector<TaskScore> tasks;
  double average_ratio = 0.0;       // over all tasks
  double goal_average_ratio = 0.0;  // over goal tasks; equals average_ratio when none
  double coverage = 0.0;
  LossSummary loss;             // member average at the most recent train step
  double mean_z_score = 0.0;    // over z^E selections since the previous record
  std::int64_t z_selections = 0;
};

void to_json(nlohmann::json& j, const TaskScore& s);
void from_json(const nlohmann::json& j, TaskScore& s);
void to_json(nlohmann::json& j, const MetricsRecord& r);
void from_json(const nlohmann::json& j, MetricsRecord& r);

/// Append-only JSON-lines stream. Each line is flushed as it is written, so
/// an interrupted run leaves a valid prefix.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path, bool append = false);
  void write(const nlohmann::json& line);

 private:
  std::ofstream out_;
};

std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);
/// The "summary" records of a metrics file, in order.
std::vector<MetricsRecord> read_metrics_records(const std::filesystem::path& path);

/// Per-step mean and sample standard deviation of a metric across seeds.
struct CurveBand {
  std::vector<std::int64_t> steps;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<int> n;
};

/// Aggregates per-seed record lists; steps missing from some seeds use the
/// seeds that have them.
CurveBand aggregate(const std::vector<std::vector<MetricsRecord>>& runs,
                    double (*metric)(const MetricsRecord&));

double metric_average_ratio(const MetricsRecord& r);
double metric_goal_ratio(const MetricsRecord& r);
double metric_coverage(const MetricsRecord& r);

/// Writes one two-column (step, value) text file per curve of a metrics file.
/// Returns the files written.
std::vector<std::filesystem::path> export_plots(const std::filesystem::path& metrics_file,
                                                const std::filesystem::path& out_dir,
                                                const std::string& prefix);

}  // namespace fbee
