#include "fbee/uncertainty.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace fbee {

namespace {

void require_ensemble(Eigen::Index k) {
  if (k < 2) throw std::invalid_argument("posterior statistics need at least two ensemble members");
}

}  // namespace

namespace {

// Columns in lexicographic order, so every statistic below sums in an order
// that does not depend on how the members are numbered.
Eigen::MatrixXd canonical_columns(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto ca = m.col(a), cb = m.col(b);
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
  });
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(order[i]);
  return out;
}

}  // namespace

// Second moments use (1/K^2) sum_{i<j} of pairwise differences, which equals
// the centered form and is exactly zero when the members coincide.
FPosteriorStats f_posterior(const Eigen::MatrixXd& member_outputs) {
  const auto K = member_outputs.cols();
  require_ensemble(K);
  const Eigen::MatrixXd m = canonical_columns(member_outputs);
  FPosteriorStats stats;
  stats.mean = m.rowwise().mean();
  stats.covariance = Eigen::MatrixXd::Zero(m.rows(), m.rows());
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) {
      const Eigen::VectorXd diff = m.col(i) - m.col(j);
      stats.covariance.noalias() += diff * diff.transpose();
    }
  }
  stats.covariance /= static_cast<double>(K * K);
  stats.trace = stats.covariance.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.covariance, Eigen::EigenvaluesOnly);
  const auto& values = eig.eigenvalues();
  stats.max_eigenvalue = values.maxCoeff();
  stats.determinant = 1.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) stats.determinant *= std::max(values(i), 0.0);
  return stats;
}

QVariance q_variance(const Eigen::MatrixXd& member_outputs, const Eigen::VectorXd& z) {
  const auto K = member_outputs.cols();
  require_ensemble(K);
  if (member_outputs.rows() != z.size()) throw std::invalid_argument("q_variance: z has the wrong size");
  // A plain loop per member: a vectorized product may sum identical columns
  // in different orders depending on their alignment.
  Eigen::VectorXd q(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    double dot = 0.0;
    for (Eigen::Index r = 0; r < z.size(); ++r) dot += member_outputs(r, k) * z(r);
    q(k) = dot;
  }
  std::sort(q.begin(), q.end());
  double variance = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) variance += (q(i) - q(j)) * (q(i) - q(j));
  }
  return {variance / static_cast<double>(K * K), q.mean()};
}

double covariance_trace(const Eigen::MatrixXd& member_outputs) {
  const auto K = member_outputs.cols();
  require_ensemble(K);
  const Eigen::MatrixXd m = canonical_columns(member_outputs);
  double trace = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) trace += (m.col(i) - m.col(j)).squaredNorm();
  }
  return trace / static_cast<double>(K * K);
}

Eigen::MatrixXd member_outputs(const ForwardModel& model, const EnsembleQuery& query) {
  if (!query.z.allFinite()) throw std::invalid_argument("ensemble query: z must be finite");
  if (query.action < 0 || query.action >= model.n_actions()) throw std::out_of_range("ensemble query: action out of range");
  const StateId states[] = {query.state};
  const auto outputs = model.forward_all_actions(states, query.z);
  Eigen::MatrixXd columns(model.embedding_dim(), static_cast<Eigen::Index>(outputs.size()));
  for (std::size_t k = 0; k < outputs.size(); ++k) columns.col(static_cast<Eigen::Index>(k)) = outputs[k].col(query.action);
  return columns;
}

FPosteriorStats f_posterior(const ForwardModel& model, const EnsembleQuery& query) {
  return f_posterior(member_outputs(model, query));
}

QVariance q_variance(const ForwardModel& model, const EnsembleQuery& query) {
  return q_variance(member_outputs(model, query), query.z);
}

double r_squared(std::span<const double> x, std::span<const double> y, bool& degenerate) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("r_squared: mismatched samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  degenerate = !(sxx > 0.0);
  if (degenerate) return 0.0;
  // A constant response is fitted exactly by the intercept.
  if (!(syy > 0.0)) return 1.0;
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

FQCorrelation f_q_correlation(const ForwardModel& model, std::span<const Eigen::VectorXd> z_samples,
                              std::span<const std::pair<StateId, ActionId>> pairs) {
  if (z_samples.size() < 2) throw std::invalid_argument("f_q_correlation: need at least two z samples");
  if (pairs.empty()) throw std::invalid_argument("f_q_correlation: need at least one state-action pair");
  require_ensemble(model.ensemble_size());
  std::map<StateId, int> index;
  std::vector<StateId> states;
  for (const auto& [s, a] : pairs) {
    if (a < 0 || a >= model.n_actions()) throw std::out_of_range("f_q_correlation: action out of range");
    if (index.emplace(s, static_cast<int>(states.size())).second) states.push_back(s);
  }
  const int A = model.n_actions();
  const int K = model.ensemble_size();
  FQCorrelation out;
  Eigen::MatrixXd members(model.embedding_dim(), K);
  for (const auto& z : z_samples) {
    const auto outputs = model.forward_all_actions(states, z);
    double trace = 0.0, variance = 0.0;
    for (const auto& [s, a] : pairs) {
      const auto column = static_cast<Eigen::Index>(index.at(s)) * A + a;
      for (int k = 0; k < K; ++k) members.col(k) = outputs[k].col(column);
      trace += covariance_trace(members);
      variance += q_variance(members, z).variance;
    }
    out.traces.push_back(trace / static_cast<double>(pairs.size()));
    out.q_variances.push_back(variance / static_cast<double>(pairs.size()));
  }
  out.r_squared = r_squared(out.traces, out.q_variances, out.degenerate);
  return out;
}

void write_plot_columns(std::ostream& out, const FQCorrelation& correlation) {
  out.precision(17);
  out << "# trace_cov_f\tvar_q\n";
  for (std::size_t i = 0; i < correlation.traces.size(); ++i) {
    out << correlation.traces[i] << '\t' << correlation.q_variances[i] << '\n';
  }
}

}  // namespace fbee
