#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbee/mdp.hpp"
#include "fbee/models.hpp"

namespace fbee {

struct EnsembleQuery {
  StateId state = 0;
  ActionId action = 0;
  Eigen::VectorXd z;
};

/// Dirac-mixture posterior of F at one query point.
struct FPosteriorStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // (1/K) sum_k (F_k - mean)(F_k - mean)^T
  double trace = 0.0;
  double max_eigenvalue = 0.0;
  double determinant = 0.0;  // product of eigenvalues, each floored at 0
};

struct QVariance {
  double variance = 0.0;  // (1/K) sum_k <F_k - mean, z>^2
  double mean_q = 0.0;    // <mean, z>
};

/// Statistics of K member outputs, one column per member.
FPosteriorStats f_posterior(const Eigen::MatrixXd& member_outputs);
QVariance q_variance(const Eigen::MatrixXd& member_outputs, const Eigen::VectorXd& z);

/// Trace of the member covariance without forming it.
double covariance_trace(const Eigen::MatrixXd& member_outputs);

/// Member outputs F_k(s, a, z) as the columns of a d x K matrix.
Eigen::MatrixXd member_outputs(const ForwardModel& model, const EnsembleQuery& query);

FPosteriorStats f_posterior(const ForwardModel& model, const EnsembleQuery& query);
QVariance q_variance(const ForwardModel& model, const EnsembleQuery& query);

struct FQCorrelation {
  double r_squared = 0.0;
  bool degenerate = false;     // the trace regressor had zero variance
  std::vector<double> traces;  // per z, batch-average trace(Cov[F])
  std::vector<double> q_variances;  // per z, batch-average Var[Q]
};

/// Least-squares R^2 of Var[Q] regressed on trace(Cov[F]) across z samples.
FQCorrelation f_q_correlation(const ForwardModel& model, std::span<const Eigen::VectorXd> z_samples,
                              std::span<const std::pair<StateId, ActionId>> pairs);

/// R^2 of a simple linear fit of y on x; `degenerate` is set when x is constant.
double r_squared(std::span<const double> x, std::span<const double> y, bool& degenerate);

/// Two whitespace-separated columns: trace, q_variance.
void write_plot_columns(std::ostream& out, const FQCorrelation& correlation);

}  // namespace fbee
