#include "fbee/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace fbee {

void RunConfig::validate() const {
  fb.validate();
  strategy.validate();
  if (total_env_steps < 1) throw std::invalid_argument("total_env_steps must be >= 1");
  if (eval_period < 1) throw std::invalid_argument("eval_period must be >= 1");
  if (n_eval_episodes < 1) throw std::invalid_argument("n_eval_episodes must be >= 1");
  if (n_reward_samples < 1) throw std::invalid_argument("n_reward_samples must be >= 1");
  if (!(train_ratio >= 0.0)) throw std::invalid_argument("train_ratio must be non-negative");
  if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
  if (env.horizon < 1) throw std::invalid_argument("env.horizon must be >= 1");
  if (!(env.gamma > 0.0 && env.gamma < 1.0)) throw std::invalid_argument("env.gamma must lie in (0, 1)");
  if (fb.use_feature_map && env.kind != EnvKind::FourRoom) {
    throw std::invalid_argument("fb.use_feature_map needs an environment with a feature map");
  }
  const bool needs_ensemble =
      strategy.kind == ExplorationKind::FbeeQ || strategy.kind == ExplorationKind::FbeeF;
  if (needs_ensemble && fb.ensemble_size < 2) {
    throw std::invalid_argument("fb.ensemble_size must be >= 2 for uncertainty-driven exploration");
  }
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"name", c.name},
                     {"env", c.env},
                     {"fb", c.fb},
                     {"strategy", c.strategy},
                     {"total_env_steps", c.total_env_steps},
                     {"eval_period", c.eval_period},
                     {"n_eval_episodes", c.n_eval_episodes},
                     {"n_reward_samples", c.n_reward_samples},
                     {"train_ratio", c.train_ratio},
                     {"buffer_capacity", c.buffer_capacity},
                     {"seed", c.seed},
                     {"output_dir", c.output_dir},
                     {"checkpoint_at_eval", c.checkpoint_at_eval}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::set<std::string> known = {
      "name",         "env",         "fb",   "strategy",   "total_env_steps",
      "eval_period",  "n_eval_episodes", "n_reward_samples", "train_ratio", "buffer_capacity",
      "seed",         "output_dir",  "checkpoint_at_eval"};
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw std::invalid_argument("unknown run config key: " + item.key());
  }
  RunConfig d;
  c.name = j.value("name", d.name);
  c.env = j.contains("env") ? j.at("env").get<EnvParams>() : d.env;
  c.fb = j.contains("fb") ? j.at("fb").get<FbConfig>() : d.fb;
  c.strategy = j.contains("strategy") ? j.at("strategy").get<ExplorationStrategy>() : d.strategy;
  c.total_env_steps = j.value("total_env_steps", d.total_env_steps);
  c.eval_period = j.value("eval_period", d.eval_period);
  c.n_eval_episodes = j.value("n_eval_episodes", d.n_eval_episodes);
  c.n_reward_samples = j.value("n_reward_samples", d.n_reward_samples);
  c.train_ratio = j.value("train_ratio", d.train_ratio);
  c.buffer_capacity = j.value("buffer_capacity", d.buffer_capacity);
  c.seed = j.value("seed", d.seed);
  c.output_dir = j.value("output_dir", d.output_dir);
  c.checkpoint_at_eval = j.value("checkpoint_at_eval", d.checkpoint_at_eval);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid config file " + path.string() + ": " + e.what());
  }
}

std::vector<ConfigKeyDoc> config_key_docs() {
  const nlohmann::json defaults = RunConfig{};
  auto value = [&](const std::string& pointer) { return defaults.at(nlohmann::json::json_pointer(pointer)).dump(); };
  return {
      {"name", value("/name"), "label used in sweep reports"},
      {"env.kind", value("/env/kind"), "four_room, chain or random"},
      {"env.side", value("/env/side"), "four-room grid side (odd, >= 5)"},
      {"env.slip_prob", value("/env/slip_prob"), "four-room probability of a random action"},
      {"env.n", value("/env/n"), "chain length"},
      {"env.n_states", value("/env/n_states"), "random MDP state count"},
      {"env.n_actions", value("/env/n_actions"), "random MDP action count"},
      {"env.branching", value("/env/branching"), "random MDP successors per (s, a)"},
      {"env.seed", value("/env/seed"), "random MDP and random-task seed"},
      {"env.gamma", value("/env/gamma"), "discount factor"},
      {"env.horizon", value("/env/horizon"), "steps per episode"},
      {"env.top_left_start", value("/env/top_left_start"), "four-room starts restricted to the top-left room"},
      {"fb.embedding_dim", value("/fb/embedding_dim"), "dimension d of z, F and B"},
      {"fb.ensemble_size", value("/fb/ensemble_size"), "number K of forward networks"},
      {"fb.hidden", value("/fb/hidden"), "hidden layer widths of every network"},
      {"fb.learning_rate", value("/fb/learning_rate"), "Adam learning rate"},
      {"fb.batch_size", value("/fb/batch_size"), "transitions per train step"},
      {"fb.target_momentum", value("/fb/target_momentum"), "Polyak coefficient tau of the target networks"},
      {"fb.ortho_coef", value("/fb/ortho_coef"), "weight of the orthonormality penalty on B"},
      {"fb.mix_ratio", value("/fb/mix_ratio"), "probability that a training z is a rescaled B(s')"},
      {"fb.attraction_at_next_state", value("/fb/attraction_at_next_state"), "attraction term uses B(s') instead of B(s)"},
      {"fb.target_action", value("/fb/target_action"), "per_member or ensemble_mean greedy TD target action"},
      {"fb.use_feature_map", value("/fb/use_feature_map"), "feed normalized (x, y) to B on the four-room grid"},
      {"strategy.kind", value("/strategy/kind"), "fbee_q, fbee_f, fb_random_z or random_action"},
      {"strategy.z_update_period", value("/strategy/z_update_period"), "environment steps between z refreshes"},
      {"strategy.n_z_candidates", value("/strategy/n_z_candidates"), "sphere samples scored per refresh"},
      {"strategy.n_score_states", value("/strategy/n_score_states"), "buffer states averaged per score"},
      {"strategy.epsilon", value("/strategy/epsilon"), "random-action probability while exploring"},
      {"strategy.score_at_current_state", value("/strategy/score_at_current_state"), "score at the current state only"},
      {"total_env_steps", value("/total_env_steps"), "environment steps per run"},
      {"eval_period", value("/eval_period"), "environment steps between evaluations"},
      {"n_eval_episodes", value("/n_eval_episodes"), "episodes per zero-shot task evaluation"},
      {"n_reward_samples", value("/n_reward_samples"), "buffer states relabeled to infer a reward embedding"},
      {"train_ratio", value("/train_ratio"), "gradient steps per environment step"},
      {"buffer_capacity", value("/buffer_capacity"), "replay buffer capacity"},
      {"seed", value("/seed"), "master seed; every random stream derives from it"},
      {"output_dir", value("/output_dir"), "directory for metrics and checkpoints"},
      {"checkpoint_at_eval", value("/checkpoint_at_eval"), "write a checkpoint at every evaluation"},
  };
}

}  // namespace fbee
