#include "fbee/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fbee {

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal samples of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void to_json(nlohmann::json& j, const TaskScore& s) {
  j = nlohmann::json{{"task", s.task},
                     {"goal", s.goal},
                     {"mean_return", s.mean_return},
                     {"std_return", s.std_return},
                     {"mean_undiscounted", s.mean_undiscounted},
                     {"optimal_return", s.optimal_return},
                     {"ratio", s.ratio},
                     {"zero_reward", s.zero_reward},
                     {"ratio_by_convention", s.ratio_by_convention}};
}

void from_json(const nlohmann::json& j, TaskScore& s) {
  j.at("task").get_to(s.task);
  j.at("goal").get_to(s.goal);
  j.at("mean_return").get_to(s.mean_return);
  j.at("std_return").get_to(s.std_return);
  j.at("mean_undiscounted").get_to(s.mean_undiscounted);
  j.at("optimal_return").get_to(s.optimal_return);
  j.at("ratio").get_to(s.ratio);
  s.zero_reward = j.value("zero_reward", false);
  s.ratio_by_convention = j.value("ratio_by_convention", false);
}

void to_json(nlohmann::json& j, const MetricsRecord& r) {
  j = nlohmann::json{{"kind", "summary"},
                     {"global_step", r.global_step},
                     {"train_steps", r.train_steps},
                     {"tasks", r.tasks},
                     {"average_ratio", r.average_ratio},
                     {"goal_average_ratio", r.goal_average_ratio},
                     {"coverage", r.coverage},
                     {"loss",
                      {{"td", r.loss.td}, {"attraction", r.loss.attraction}, {"ortho", r.loss.ortho}, {"total", r.loss.total}}},
                     {"mean_z_score", r.mean_z_score},
                     {"z_selections", r.z_selections}};
}

void from_json(const nlohmann::json& j, MetricsRecord& r) {
  j.at("global_step").get_to(r.global_step);
  j.at("train_steps").get_to(r.train_steps);
  j.at("tasks").get_to(r.tasks);
  j.at("average_ratio").get_to(r.average_ratio);
  j.at("goal_average_ratio").get_to(r.goal_average_ratio);
  j.at("coverage").get_to(r.coverage);
  const auto& loss = j.at("loss");
  loss.at("td").get_to(r.loss.td);
  loss.at("attraction").get_to(r.loss.attraction);
  loss.at("ortho").get_to(r.loss.ortho);
  loss.at("total").get_to(r.loss.total);
  j.at("mean_z_score").get_to(r.mean_z_score);
  j.at("z_selections").get_to(r.z_selections);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open metrics file " + path.string());
}

void MetricsWriter::write(const nlohmann::json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("metrics write failed");
}

std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  return lines;
}

std::vector<MetricsRecord> read_metrics_records(const std::filesystem::path& path) {
  std::vector<MetricsRecord> records;
  for (const auto& line : read_json_lines(path)) {
    if (line.value("kind", "") == "summary") records.push_back(line.get<MetricsRecord>());
  }
  return records;
}

CurveBand aggregate(const std::vector<std::vector<MetricsRecord>>& runs,
                    double (*metric)(const MetricsRecord&)) {
  std::map<std::int64_t, std::vector<double>> by_step;
  for (const auto& run : runs) {
    for (const auto& record : run) by_step[record.global_step].push_back(metric(record));
  }
  CurveBand band;
  for (const auto& [step, values] : by_step) {
    band.steps.push_back(step);
    band.mean.push_back(mean(values));
    band.std.push_back(sample_std(values));
    band.n.push_back(static_cast<int>(values.size()));
  }
  return band;
}

double metric_average_ratio(const MetricsRecord& r) { return r.average_ratio; }
double metric_goal_ratio(const MetricsRecord& r) { return r.goal_average_ratio; }
double metric_coverage(const MetricsRecord& r) { return r.coverage; }

std::vector<std::filesystem::path> export_plots(const std::filesystem::path& metrics_file,
                                                const std::filesystem::path& out_dir,
                                                const std::string& prefix) {
  const auto records = read_metrics_records(metrics_file);
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> curves;
  for (const auto& r : records) {
    curves["average_ratio"].emplace_back(r.global_step, r.average_ratio);
    curves["goal_average_ratio"].emplace_back(r.global_step, r.goal_average_ratio);
    curves["coverage"].emplace_back(r.global_step, r.coverage);
    curves["loss_total"].emplace_back(r.global_step, r.loss.total);
    for (const auto& t : r.tasks) curves["ratio_" + t.task].emplace_back(r.global_step, t.ratio);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, points] : curves) {
    const auto path = out_dir / (prefix + name + ".dat");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
    out << "# step\t" << name << '\n';
    for (const auto& [step, value] : points) out << step << '\t' << value << '\n';
    written.push_back(path);
  }
  return written;
}

}  // namespace fbee
