#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace fbee::ref {

Eigen::VectorXd iterative_policy_evaluation(const DiscreteMdp& mdp, const TabularPolicy& policy,
                                            const Eigen::VectorXd& pair_reward, double tol) {
  const int S = mdp.n_states(), A = mdp.n_actions();
  const double gamma = mdp.gamma();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(S * A);
  for (int iter = 0; iter < 100000; ++iter) {
    // Value of arriving in s': E_{a'~pi}[r(s',a') + gamma Q(s',a')].
    Eigen::VectorXd arrive = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        arrive(s) += policy.probabilities(s, a) * (pair_reward(s * A + a) + gamma * q(s * A + a));
      }
    }
    Eigen::VectorXd next(S * A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double v = 0.0;
        for (int t = 0; t < S; ++t) v += mdp.probability(s, a, t) * arrive(t);
        next(s * A + a) = v;
      }
    }
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < tol) break;
  }
  return q;
}

Eigen::MatrixXd monte_carlo_successor_measure(const DiscreteMdp& mdp, const TabularPolicy& policy,
                                              int rollouts, Rng& rng) {
  const int S = mdp.n_states(), A = mdp.n_actions(), N = S * A;
  const double gamma = mdp.gamma();
  int horizon = 1;
  while (std::pow(gamma, horizon) / (1.0 - gamma) > 1e-7) ++horizon;
  std::uniform_real_distribution<double> unit;
  auto draw_action = [&](StateId s) {
    const double u = unit(rng);
    double c = 0.0;
    for (int a = 0; a < A; ++a) {
      c += policy.probabilities(s, a);
      if (u < c) return a;
    }
    return A - 1;
  };
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (int s0 = 0; s0 < S; ++s0) {
    for (int a0 = 0; a0 < A; ++a0) {
      for (int r = 0; r < rollouts; ++r) {
        StateId s = s0;
        ActionId a = a0;
        double discount = 1.0;
        for (int t = 0; t < horizon; ++t) {
          s = step(mdp, s, a, rng);
          a = draw_action(s);
          m(s0 * A + a0, s * A + a) += discount;
          discount *= gamma;
        }
      }
    }
  }
  return m / rollouts;
}

double hitting_time(const DiscreteMdp& mdp, const TabularPolicy& policy, StateId from, StateId target) {
  const int S = mdp.n_states(), A = mdp.n_actions();
  std::vector<int> transient;
  for (int s = 0; s < S; ++s) {
    if (s != target) transient.push_back(s);
  }
  const int n = static_cast<int>(transient.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < A; ++a) {
        q(i, j) += policy.probabilities(transient[i], a) * mdp.probability(transient[i], a, transient[j]);
      }
    }
  }
  const Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(n, n) - q;
  const Eigen::VectorXd t = fundamental.fullPivLu().solve(Eigen::VectorXd::Ones(n));
  const auto it = std::find(transient.begin(), transient.end(), from);
  return t(it - transient.begin());
}

Eigen::MatrixXd flat_covariance(const Eigen::MatrixXd& members) {
  const auto d = members.rows(), K = members.cols();
  std::vector<double> mean(d, 0.0);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) mean[i] += members(i, k);
    mean[i] /= K;
  }
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) acc += (members(i, k) - mean[i]) * (members(j, k) - mean[j]);
      cov(i, j) = acc / K;
    }
  }
  return cov;
}

std::vector<double> central_differences(std::vector<double*> params, const std::function<double()>& loss,
                                        double h) {
  std::vector<double> out;
  out.reserve(params.size());
  for (double* p : params) {
    const double saved = *p;
    *p = saved + h;
    const double up = loss();
    *p = saved - h;
    const double down = loss();
    *p = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

std::vector<double*> parameter_addresses(nn::ParameterSet& params) {
  std::vector<double*> out;
  for (auto& layer : params) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out.push_back(&layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(&layer.bias(r));
  }
  return out;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

double scalar_adam_quadratic(double w, double lr, int steps, double beta1, double beta2, double eps) {
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * w;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, t));
    const double vhat = v / (1.0 - std::pow(beta2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  return w;
}

std::vector<Eigen::MatrixXd> PlantedForward::forward_all_actions(std::span<const StateId> states,
                                                                 const Eigen::VectorXd& z) const {
  ++queries;
  std::vector<Eigen::MatrixXd> out;
  for (int k = 0; k < members_; ++k) {
    Eigen::MatrixXd m(d_, static_cast<Eigen::Index>(states.size()) * n_actions_);
    for (std::size_t i = 0; i < states.size(); ++i) {
      for (int a = 0; a < n_actions_; ++a) m.col(static_cast<Eigen::Index>(i) * n_actions_ + a) = fn_(k, states[i], a, z);
    }
    out.push_back(std::move(m));
  }
  return out;
}

Eigen::MatrixXd TableBackward::backward(std::span<const StateId> states) const {
  ++queries;
  Eigen::MatrixXd out(table_.rows(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = table_.col(states[i]);
  return out;
}

}  // namespace fbee::ref
