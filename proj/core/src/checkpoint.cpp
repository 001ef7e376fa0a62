#include "fbee/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fbee/binary_io.hpp"

namespace fbee {

namespace {

constexpr std::uint32_t kMagic = 0x4b434246;  // "FBCK"
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEnsembleTag = 0x534e4531;
constexpr std::uint32_t kCollectionTag = 0x4c4f4331;
constexpr std::uint32_t kBufferTag = 0x46554231;

void write_adam(BinaryWriter& out, const nn::AdamState& s) {
  out.i64(s.step);
  out.f64(s.config.learning_rate);
  out.f64(s.config.beta1);
  out.f64(s.config.beta2);
  out.f64(s.config.epsilon);
  nn::write_parameters(out, s.first_moment);
  nn::write_parameters(out, s.second_moment);
}

nn::AdamState read_adam(BinaryReader& in) {
  nn::AdamState s;
  s.step = in.i64();
  s.config.learning_rate = in.f64();
  s.config.beta1 = in.f64();
  s.config.beta2 = in.f64();
  s.config.epsilon = in.f64();
  s.first_moment = nn::read_parameters(in);
  s.second_moment = nn::read_parameters(in);
  return s;
}

void read_network(BinaryReader& in, nn::Mlp& net) {
  auto loaded = nn::read_mlp(in);
  if (loaded.layer_sizes() != net.layer_sizes()) throw std::runtime_error("checkpoint: network shape mismatch");
  net = std::move(loaded);
}

void read_target(BinaryReader& in, nn::TargetCopy& target) {
  read_network(in, target.net);
  target.tau = in.f64();
}

std::vector<int> to_ints(const std::vector<char>& flags) { return {flags.begin(), flags.end()}; }

std::vector<char> to_flags(const std::vector<int>& ints, std::size_t n) {
  if (ints.size() != n) throw std::runtime_error("checkpoint: visit table has the wrong size");
  return {ints.begin(), ints.end()};
}

}  // namespace

RunState RunState::fresh(const RunConfig& config) {
  config.validate();
  Environment env = make_environment(config.env);
  auto init_rng = derive_rng(config.seed, "init");
  FbEnsemble ensemble(config.fb, env.mdp.n_states(), env.mdp.n_actions(), env.mdp.gamma(), env.features, init_rng);
  CollectionState collection(env.mdp.n_states());
  return RunState{config,
                  std::move(env),
                  std::move(ensemble),
                  ReplayBuffer(static_cast<std::size_t>(config.buffer_capacity)),
                  std::move(collection),
                  derive_rng(config.seed, "explore"),
                  derive_rng(config.seed, "train")};
}

void write_ensemble(BinaryWriter& out, const FbEnsemble& e) {
  out.u32(kEnsembleTag);
  out.i64(e.train_steps());
  out.u64(static_cast<std::uint64_t>(e.ensemble_size()));
  for (int k = 0; k < e.ensemble_size(); ++k) {
    nn::write_mlp(out, e.forward_net(k));
    nn::write_mlp(out, e.forward_target(k).net);
    out.f64(e.forward_target(k).tau);
    write_adam(out, e.forward_optimizer(k));
  }
  nn::write_mlp(out, e.backward_net());
  nn::write_mlp(out, e.backward_target().net);
  out.f64(e.backward_target().tau);
  write_adam(out, e.backward_optimizer());
}

void read_ensemble(BinaryReader& in, FbEnsemble& e) {
  in.expect_tag(kEnsembleTag, "ensemble");
  e.set_train_steps(in.i64());
  if (in.u64() != static_cast<std::uint64_t>(e.ensemble_size())) {
    throw std::runtime_error("checkpoint: ensemble size mismatch");
  }
  for (int k = 0; k < e.ensemble_size(); ++k) {
    read_network(in, e.forward_net(k));
    read_target(in, e.forward_target(k));
    e.forward_optimizer(k) = read_adam(in);
  }
  read_network(in, e.backward_net());
  read_target(in, e.backward_target());
  e.backward_optimizer() = read_adam(in);
}

void write_checkpoint(std::ostream& stream, const RunState& state) {
  BinaryWriter out(stream);
  out.u32(kMagic);
  out.u32(kVersion);
  out.string(nlohmann::json(state.config).dump());
  write_ensemble(out, state.ensemble);
  out.string(serialize_rng(state.explore_rng));
  out.string(serialize_rng(state.train_rng));

  const auto& c = state.collection;
  out.u32(kCollectionTag);
  out.i64(c.global_step);
  out.i64(c.episode);
  out.i64(c.episode_step);
  out.i64(c.state);
  out.vector(c.z);
  out.f64(c.z_score);
  out.f64(c.train_credit);
  out.ints(to_ints(c.visited));
  out.ints(to_ints(c.episode_visited));
  out.u64(c.z_log.size());
  for (const auto& z : c.z_log) {
    out.i64(z.global_step);
    out.i64(z.episode);
    out.f64(z.z_norm);
    out.f64(z.score);
    out.f64(z.coverage);
    out.i64(z.fallback);
  }
  out.u64(c.episode_log.size());
  for (const auto& e : c.episode_log) {
    out.i64(e.episode);
    out.i64(e.global_step);
    out.i64(e.distinct_states);
    out.f64(e.coverage);
  }

  out.u32(kBufferTag);
  out.u64(state.buffer.capacity());
  out.u64(state.buffer.size());
  for (std::size_t i = 0; i < state.buffer.size(); ++i) {
    const auto& t = state.buffer[i];
    out.i64(t.state);
    out.i64(t.action);
    out.i64(t.next_state);
    out.i64(t.episode_step);
  }
}

RunState read_checkpoint(std::istream& stream) {
  BinaryReader in(stream);
  if (in.u32() != kMagic) throw std::runtime_error("not a checkpoint file");
  if (const auto version = in.u32(); version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto config = nlohmann::json::parse(in.string()).get<RunConfig>();
  RunState state = RunState::fresh(config);
  read_ensemble(in, state.ensemble);
  state.explore_rng = deserialize_rng(in.string());
  state.train_rng = deserialize_rng(in.string());

  auto& c = state.collection;
  const auto n = static_cast<std::size_t>(state.env.mdp.n_states());
  in.expect_tag(kCollectionTag, "collection");
  c.global_step = in.i64();
  c.episode = in.i64();
  c.episode_step = static_cast<int>(in.i64());
  c.state = static_cast<StateId>(in.i64());
  c.z = in.vector();
  c.z_score = in.f64();
  c.train_credit = in.f64();
  c.visited = to_flags(in.ints(), n);
  c.episode_visited = to_flags(in.ints(), n);
  c.z_log.resize(in.u64());
  for (auto& z : c.z_log) {
    z.global_step = in.i64();
    z.episode = in.i64();
    z.z_norm = in.f64();
    z.score = in.f64();
    z.coverage = in.f64();
    z.fallback = in.i64() != 0;
  }
  c.episode_log.resize(in.u64());
  for (auto& e : c.episode_log) {
    e.episode = in.i64();
    e.global_step = in.i64();
    e.distinct_states = static_cast<int>(in.i64());
    e.coverage = in.f64();
  }

  in.expect_tag(kBufferTag, "replay buffer");
  const auto capacity = in.u64();
  const auto size = in.u64();
  if (size > capacity) throw std::runtime_error("checkpoint: replay buffer larger than its capacity");
  state.buffer = ReplayBuffer(capacity);
  for (std::uint64_t i = 0; i < size; ++i) {
    Transition t;
    t.state = static_cast<StateId>(in.i64());
    t.action = static_cast<ActionId>(in.i64());
    t.next_state = static_cast<StateId>(in.i64());
    t.episode_step = static_cast<int>(in.i64());
    if (!state.env.mdp.valid_state(t.state) || !state.env.mdp.valid_action(t.action) ||
        !state.env.mdp.valid_state(t.next_state)) {
      throw std::runtime_error("checkpoint: transition out of range");
    }
    state.buffer.push(t);
  }
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const RunState& state) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    write_checkpoint(out, state);
  }
  std::filesystem::rename(tmp, path);
}

RunState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace fbee
