#include <gtest/gtest.h>

#include "fbee/environments.hpp"
#include "fbee/explorer.hpp"
#include "fbee/fb.hpp"
#include "fbee/uncertainty.hpp"
#include "oracles.hpp"

using namespace fbee;

namespace {

ref::PlantedForward constant_model(int members, int d, int n_actions) {
  return ref::PlantedForward(members, d, n_actions, [d](int, StateId, ActionId, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(d).eval();
  });
}

ReplayBuffer filled_buffer(int n_states, int n) {
  ReplayBuffer buffer(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) buffer.push({i % n_states, 0, (i + 1) % n_states, 0});
  return buffer;
}

ExplorationStrategy strategy_of(ExplorationKind kind) {
  ExplorationStrategy s;
  s.kind = kind;
  s.n_z_candidates = 8;
  s.n_score_states = 16;
  return s;
}

}  // namespace

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer buffer(3);
  for (int i = 0; i < 5; ++i) buffer.push({i, 0, i, i});
  ASSERT_EQ(buffer.size(), 3u);
  EXPECT_EQ(buffer[0].state, 2);
  EXPECT_EQ(buffer[1].state, 3);
  EXPECT_EQ(buffer[2].state, 4);
  const auto items = buffer.contents();
  EXPECT_EQ(items.front().state, 2);
  EXPECT_EQ(items.back().state, 4);
  EXPECT_THROW(buffer[3], std::out_of_range);
}

TEST(ReplayBuffer, SamplingAnEmptyBufferThrows) {
  ReplayBuffer buffer(4);
  Rng rng(1);
  EXPECT_THROW(buffer.sample_index(rng), std::logic_error);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayBuffer, SamplingIsUniform) {
  const auto buffer = filled_buffer(4, 4);
  Rng rng(2);
  std::vector<int> hits(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++hits[buffer.sample_index(rng)];
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / n, 0.25, 0.01);
}

TEST(StrategyNames, RoundTrip) {
  for (auto kind : {ExplorationKind::FbeeQ, ExplorationKind::FbeeF, ExplorationKind::FbRandomZ,
                    ExplorationKind::RandomAction}) {
    EXPECT_EQ(exploration_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_THROW(exploration_kind_from_string("greedy"), std::invalid_argument);
  auto s = strategy_of(ExplorationKind::FbeeF);
  s.z_update_period = 7;
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<ExplorationStrategy>(), s);
  s.z_update_period = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(SelectZ, IdenticalMembersScoreZeroAndKeepTheFirstCandidate) {
  auto model = constant_model(3, 4, 2);
  const auto buffer = filled_buffer(5, 20);
  for (auto kind : {ExplorationKind::FbeeQ, ExplorationKind::FbeeF}) {
    Rng rng(3), replay(3);
    const auto selection = select_exploration_z(model, buffer, strategy_of(kind), rng);
    ASSERT_EQ(selection.scores.size(), 8u);
    for (double s : selection.scores) EXPECT_EQ(s, 0.0);
    EXPECT_EQ(selection.chosen, 0);
    EXPECT_LT((selection.z - sample_z_sphere(4, replay)).norm(), 1e-15);
  }
}

TEST(SelectZ, PicksThePlantedHighVarianceDirection) {
  // Members disagree only along e_2, so Var[Q] = z_2^2 and the candidate with
  // the largest |z_2| must win.
  ref::PlantedForward model(2, 3, 2, [](int k, StateId, ActionId, const Eigen::VectorXd&) {
    return Eigen::Vector3d(0.0, k == 0 ? 1.0 : -1.0, 0.0).eval();
  });
  const auto buffer = filled_buffer(4, 12);
  Rng rng(4), replay(4);
  auto strategy = strategy_of(ExplorationKind::FbeeQ);
  strategy.n_z_candidates = 32;
  const auto selection = select_exploration_z(model, buffer, strategy, rng);
  double best = -1.0;
  int best_index = -1;
  for (int c = 0; c < 32; ++c) {
    const double z2 = sample_z_sphere(3, replay)(1);
    EXPECT_NEAR(selection.scores[c], z2 * z2, 1e-12);
    if (z2 * z2 > best) {
      best = z2 * z2;
      best_index = c;
    }
  }
  EXPECT_EQ(selection.chosen, best_index);
  EXPECT_NEAR(selection.score, best, 1e-12);
  EXPECT_NEAR(std::abs(selection.z(1)), std::sqrt(best), 1e-12);
}

TEST(SelectZ, ReturnedScoreIsTheMaximum) {
  Rng init(5);
  FbConfig config;
  config.embedding_dim = 4;
  config.ensemble_size = 3;
  config.hidden = {8};
  const FbEnsemble e(config, 6, 2, 0.9, std::nullopt, init);
  const auto buffer = filled_buffer(6, 30);
  for (auto kind : {ExplorationKind::FbeeQ, ExplorationKind::FbeeF}) {
    Rng rng(6);
    const auto selection = select_exploration_z(e, buffer, strategy_of(kind), rng);
    ASSERT_FALSE(selection.scores.empty());
    for (double s : selection.scores) EXPECT_LE(s, selection.score);
    EXPECT_NEAR(selection.z.norm(), 2.0, 1e-12);
    EXPECT_FALSE(selection.fallback);
  }
}

TEST(SelectZ, IsDeterministicGivenTheSeed) {
  Rng init(7);
  FbConfig config;
  config.embedding_dim = 4;
  config.ensemble_size = 3;
  config.hidden = {8};
  const FbEnsemble e(config, 6, 2, 0.9, std::nullopt, init);
  const auto buffer = filled_buffer(6, 30);
  Rng a(8), b(8);
  const auto first = select_exploration_z(e, buffer, strategy_of(ExplorationKind::FbeeQ), a);
  const auto second = select_exploration_z(e, buffer, strategy_of(ExplorationKind::FbeeQ), b);
  EXPECT_EQ(first.z, second.z);
  EXPECT_EQ(first.scores, second.scores);
}

TEST(SelectZ, RandomZIgnoresTheModel) {
  auto model = constant_model(3, 5, 2);
  const auto buffer = filled_buffer(5, 20);
  Rng rng(9), replay(9);
  const auto selection = select_exploration_z(model, buffer, strategy_of(ExplorationKind::FbRandomZ), rng);
  EXPECT_EQ(model.queries, 0);
  EXPECT_TRUE(selection.scores.empty());
  EXPECT_EQ(selection.chosen, -1);
  EXPECT_LT((selection.z - sample_z_sphere(5, replay)).norm(), 1e-15);
}

TEST(SelectZ, RandomActionReturnsZeroWithoutDrawing) {
  auto model = constant_model(3, 5, 2);
  const auto buffer = filled_buffer(5, 20);
  Rng rng(10), untouched(10);
  const auto selection = select_exploration_z(model, buffer, strategy_of(ExplorationKind::RandomAction), rng);
  EXPECT_EQ(model.queries, 0);
  EXPECT_EQ(selection.z, Eigen::VectorXd::Zero(5));
  EXPECT_EQ(rng(), untouched());
}

TEST(SelectZ, EmptyBufferFallsBackToASphereSample) {
  auto model = constant_model(3, 5, 2);
  ReplayBuffer empty(10);
  Rng rng(11);
  const auto selection = select_exploration_z(model, empty, strategy_of(ExplorationKind::FbeeQ), rng);
  EXPECT_TRUE(selection.fallback);
  EXPECT_EQ(model.queries, 0);
  EXPECT_NEAR(selection.z.norm(), std::sqrt(5.0), 1e-12);
}

TEST(SelectZ, CurrentStateScoringIgnoresTheBuffer) {
  ref::PlantedForward model(2, 2, 1, [](int k, StateId s, ActionId, const Eigen::VectorXd&) {
    return Eigen::Vector2d(s == 3 ? (k == 0 ? 1.0 : -1.0) : 0.0, 0.0).eval();
  });
  ReplayBuffer empty(4);
  auto strategy = strategy_of(ExplorationKind::FbeeQ);
  strategy.score_at_current_state = true;
  Rng rng(12);
  const auto selection = select_exploration_z(model, empty, strategy, rng, StateId{3});
  EXPECT_FALSE(selection.fallback);
  EXPECT_NEAR(selection.score, selection.z(0) * selection.z(0), 1e-12);
  EXPECT_GT(selection.score, 0.0);
}

TEST(SelectZ, SingleMemberEnsembleIsRejected) {
  auto model = constant_model(1, 3, 2);
  const auto buffer = filled_buffer(3, 5);
  Rng rng(13);
  EXPECT_THROW(select_exploration_z(model, buffer, strategy_of(ExplorationKind::FbeeQ), rng), std::invalid_argument);
}

TEST(ExplorationScore, WeightsStatesByMultiplicity) {
  ref::PlantedForward model(2, 1, 1, [](int k, StateId s, ActionId, const Eigen::VectorXd&) {
    const double spread = s == 0 ? 1.0 : 3.0;
    return Eigen::VectorXd::Constant(1, k == 0 ? spread : -spread).eval();
  });
  const std::vector<StateId> states{0, 1};
  const std::vector<int> counts{3, 1};
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(exploration_score(model, ExplorationKind::FbeeQ, z, states, counts), (3 * 1.0 + 9.0) / 4.0, 1e-12);
  EXPECT_NEAR(exploration_score(model, ExplorationKind::FbeeF, z, states, counts), (3 * 1.0 + 9.0) / 4.0, 1e-12);
}

TEST(ExplorationAction, EpsilonOneIsUniform) {
  ref::PlantedForward model(2, 2, 4, [](int, StateId, ActionId a, const Eigen::VectorXd&) {
    return Eigen::Vector2d(a == 2 ? 1.0 : 0.0, 0.0).eval();
  });
  auto strategy = strategy_of(ExplorationKind::FbeeQ);
  strategy.epsilon = 0.999999;
  Rng rng(14);
  std::vector<int> hits(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++hits[exploration_action(strategy, model, 0, Eigen::Vector2d(1, 0), rng)];
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / n, 0.25, 0.01);
}

TEST(ExplorationAction, EpsilonZeroIsGreedy) {
  ref::PlantedForward model(2, 2, 4, [](int, StateId, ActionId a, const Eigen::VectorXd&) {
    return Eigen::Vector2d(a == 2 ? 1.0 : 0.0, 0.0).eval();
  });
  auto strategy = strategy_of(ExplorationKind::FbeeQ);
  strategy.epsilon = 0.0;
  Rng rng(15);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(exploration_action(strategy, model, 0, Eigen::Vector2d(1, 0), rng), 2);
}

TEST(ExplorationAction, EpsilonSetsTheRandomFraction) {
  // Greedy action 2; random draws land on 2 a quarter of the time.
  ref::PlantedForward model(2, 2, 4, [](int, StateId, ActionId a, const Eigen::VectorXd&) {
    return Eigen::Vector2d(a == 2 ? 1.0 : 0.0, 0.0).eval();
  });
  auto strategy = strategy_of(ExplorationKind::FbeeQ);
  strategy.epsilon = 0.1;
  Rng rng(16);
  int off_greedy = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) off_greedy += exploration_action(strategy, model, 0, Eigen::Vector2d(1, 0), rng) != 2;
  EXPECT_NEAR(static_cast<double>(off_greedy) / n, 0.1 * 0.75, 0.005);
}

TEST(Collect, PeriodEqualToHorizonGivesOneZPerEpisode) {
  const auto env = build_four_room(5, 0.0, 0.98, 20);
  auto model = constant_model(2, 3, 4);
  auto strategy = strategy_of(ExplorationKind::FbRandomZ);
  strategy.z_update_period = 20;
  ReplayBuffer buffer(1000);
  CollectionState state(env.mdp.n_states());
  Rng rng(17);
  collect(env.mdp, env.episode, model, strategy, buffer, state, rng, 100);
  EXPECT_EQ(state.z_log.size(), 5u);
  for (std::size_t i = 0; i < state.z_log.size(); ++i) EXPECT_EQ(state.z_log[i].global_step, 20 * static_cast<std::int64_t>(i));
  EXPECT_EQ(state.episode_log.size(), 5u);
  EXPECT_EQ(state.episode, 5);
}

TEST(Collect, ShortPeriodRefreshesWithinTheEpisode) {
  const auto env = build_four_room(5, 0.0, 0.98, 1000);
  auto model = constant_model(2, 3, 4);
  auto strategy = strategy_of(ExplorationKind::FbRandomZ);
  strategy.z_update_period = 100;
  ReplayBuffer buffer(2000);
  CollectionState state(env.mdp.n_states());
  Rng rng(18);
  collect(env.mdp, env.episode, model, strategy, buffer, state, rng, 1000);
  ASSERT_EQ(state.z_log.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(state.z_log[i].global_step, 100 * i);
}

TEST(Collect, OneStepAddsOneTransition) {
  const auto env = build_four_room(5, 0.0);
  auto model = constant_model(2, 3, 4);
  ReplayBuffer buffer(10);
  CollectionState state(env.mdp.n_states());
  Rng rng(19);
  collect(env.mdp, env.episode, model, strategy_of(ExplorationKind::FbRandomZ), buffer, state, rng, 1);
  ASSERT_EQ(buffer.size(), 1u);
  EXPECT_EQ(buffer[0].episode_step, 0);
  EXPECT_EQ(state.global_step, 1);
  EXPECT_EQ(state.state, buffer[0].next_state);
}

TEST(Collect, RandomActionNeverQueriesTheModel) {
  const auto env = build_four_room(5, 0.0);
  auto model = constant_model(2, 3, 4);
  ReplayBuffer buffer(1000);
  CollectionState state(env.mdp.n_states());
  Rng rng(20);
  collect(env.mdp, env.episode, model, strategy_of(ExplorationKind::RandomAction), buffer, state, rng, 500);
  EXPECT_EQ(model.queries, 0);
  EXPECT_EQ(buffer.size(), 500u);
}

TEST(Collect, TrainHookFollowsTheRatio) {
  const auto env = build_four_room(5, 0.0);
  auto model = constant_model(2, 3, 4);
  ReplayBuffer buffer(1000);
  CollectionState state(env.mdp.n_states());
  Rng rng(21);
  std::vector<std::int64_t> calls;
  collect(env.mdp, env.episode, model, strategy_of(ExplorationKind::RandomAction), buffer, state, rng, 10, 0.5,
          [&](std::int64_t step) {
            calls.push_back(step);
            EXPECT_EQ(buffer.size(), static_cast<std::size_t>(step));
          });
  EXPECT_EQ(calls, (std::vector<std::int64_t>{2, 4, 6, 8, 10}));
}

TEST(Collect, ResumingInChunksMatchesOneCall) {
  const auto env = build_four_room(7, 0.1, 0.98, 30);
  auto model = constant_model(2, 3, 4);
  const auto strategy = strategy_of(ExplorationKind::FbRandomZ);
  ReplayBuffer whole(500), parts(500);
  CollectionState a(env.mdp.n_states()), b(env.mdp.n_states());
  Rng rng_a(22), rng_b(22);
  collect(env.mdp, env.episode, model, strategy, whole, a, rng_a, 200);
  collect(env.mdp, env.episode, model, strategy, parts, b, rng_b, 73);
  collect(env.mdp, env.episode, model, strategy, parts, b, rng_b, 127);
  EXPECT_EQ(whole.contents(), parts.contents());
  EXPECT_EQ(a.visited, b.visited);
  EXPECT_EQ(a.z, b.z);
}

TEST(Collect, StartsEpisodesInTheStartRegion) {
  const auto env = build_four_room(11, 0.1, 0.98, 50);
  auto model = constant_model(2, 3, 4);
  ReplayBuffer buffer(5000);
  CollectionState state(env.mdp.n_states());
  Rng rng(23);
  collect(env.mdp, env.episode, model, strategy_of(ExplorationKind::RandomAction), buffer, state, rng, 1000);
  const auto& region = env.episode.start_region;
  for (const auto& t : buffer.contents()) {
    if (t.episode_step == 0) {
      EXPECT_NE(std::find(region.begin(), region.end(), t.state), region.end());
    }
  }
}

TEST(Coverage, EmptyFullAndPartial) {
  ReplayBuffer empty(4);
  EXPECT_EQ(coverage(empty, 5), 0.0);
  EXPECT_EQ(coverage(filled_buffer(5, 5), 5), 1.0);
  const std::vector<Transition> items{{0, 0, 1, 0}, {1, 0, 1, 1}};
  EXPECT_DOUBLE_EQ(coverage(items, 4), 0.5);
  EXPECT_THROW(coverage(items, 0), std::invalid_argument);
}

TEST(Coverage, ChainRandomWalkMatchesTheVisitedSet) {
  const auto mdp = build_chain(10, 0.9);
  const EpisodeSpec spec{20, {}};
  auto model = constant_model(2, 3, 2);
  ReplayBuffer buffer(100);
  CollectionState state(mdp.n_states());
  Rng rng(24);
  collect(mdp, spec, model, strategy_of(ExplorationKind::RandomAction), buffer, state, rng, 100);
  std::vector<char> seen(10, 0);
  for (const auto& t : buffer.contents()) seen[t.state] = seen[t.next_state] = 1;
  const double expected = std::count(seen.begin(), seen.end(), 1) / 10.0;
  EXPECT_DOUBLE_EQ(coverage(buffer, 10), expected);
  EXPECT_DOUBLE_EQ(state.coverage(), expected);
}
