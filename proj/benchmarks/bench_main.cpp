#include <benchmark/benchmark.h>

#include "fbee/environments.hpp"
#include "fbee/explorer.hpp"
#include "fbee/fb.hpp"
#include "fbee/oracle.hpp"
#include "fbee/uncertainty.hpp"

namespace {

using namespace fbee;

struct Setup {
  Environment env = build_four_room(11, 0.05);
  Rng rng = derive_rng(7, "bench");
  FbEnsemble ensemble;
  ReplayBuffer buffer{100000};

  Setup() : ensemble(FbConfig{}, env.mdp.n_states(), env.mdp.n_actions(), env.mdp.gamma(), std::nullopt, rng) {
    const auto start = start_distribution(env.mdp, env.episode);
    for (int e = 0; e < 50; ++e) {
      auto episode = rollout(env.mdp, env.episode,
                             [](StateId, int, Rng& r) { return std::uniform_int_distribution<ActionId>(0, 3)(r); }, rng);
      for (const auto& t : episode) buffer.push(t);
    }
  }
};

Setup& setup() {
  static Setup s;
  return s;
}

void BM_TrainStep(benchmark::State& state) {
  auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s.ensemble, s.buffer, s.rng));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_SelectExplorationZ(benchmark::State& state) {
  auto& s = setup();
  ExplorationStrategy strategy;
  strategy.kind = state.range(0) == 0 ? ExplorationKind::FbeeQ : ExplorationKind::FbeeF;
  for (auto _ : state) benchmark::DoNotOptimize(select_exploration_z(s.ensemble, s.buffer, strategy, s.rng));
}
BENCHMARK(BM_SelectExplorationZ)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ForwardAllActions(benchmark::State& state) {
  auto& s = setup();
  std::vector<StateId> states(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = static_cast<StateId>(i % 121);
  const Eigen::VectorXd z = sample_z_sphere(16, s.rng);
  for (auto _ : state) benchmark::DoNotOptimize(s.ensemble.forward_all_actions(states, z));
}
BENCHMARK(BM_ForwardAllActions)->Arg(1)->Arg(64)->Arg(256);

void BM_ExactSuccessorMeasure(benchmark::State& state) {
  auto& s = setup();
  const auto policy = TabularPolicy::uniform(s.env.mdp.n_states(), s.env.mdp.n_actions());
  for (auto _ : state) benchmark::DoNotOptimize(exact_successor_measure(s.env.mdp, policy));
}
BENCHMARK(BM_ExactSuccessorMeasure)->Unit(benchmark::kMillisecond);

void BM_ValueIteration(benchmark::State& state) {
  auto& s = setup();
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(s.env.mdp.n_pairs());
  reward.tail(4).setOnes();
  for (auto _ : state) benchmark::DoNotOptimize(value_iteration(s.env.mdp, reward));
}
BENCHMARK(BM_ValueIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
