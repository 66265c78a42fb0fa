#include "a3ps/eda/actor_critic.hpp"

#include "a3ps/errors.hpp"

namespace a3ps::eda {

ActorCriticConfig ActorCriticConfig::for_env(const env::EnvConfig& cfg, env::ObservationMode mode) {
  ActorCriticConfig c;
  c.frame_size = env::frame_size(cfg, mode);
  c.goal_size = cfg.rows;
  c.mode = mode;
  return c;
}

void ActorCriticConfig::validate() const {
  if (frame_size < 1 || goal_size < 1) throw ConfigError("actor-critic input sizes must be positive");
  if (embedding < 1 || hidden < 1) throw ConfigError("actor-critic layer sizes must be positive");
  if (mode == env::ObservationMode::Pixels) {
    if (frame_size != env::kPixelSide * env::kPixelSide * 3) throw ConfigError("pixel frame size mismatch");
    if (patch < 1 || env::kPixelSide % patch != 0) throw ConfigError("patch must divide the image side");
    if (patch_features < 1) throw ConfigError("patch_features must be positive");
  }
}

ObservationBatch make_batch(std::span<const env::Observation* const> observations) {
  if (observations.empty()) throw ContractError("make_batch: no observations");
  const std::size_t n = observations.size();
  const auto fs = static_cast<std::size_t>(observations.front()->frame_size);
  const std::size_t gs = observations.front()->goal_vector.size();
  ObservationBatch b;
  b.frames.assign(env::kFrameStack, nn::Tensor::zeros(n, fs));
  b.goals = nn::Tensor::zeros(n, gs);
  for (std::size_t i = 0; i < n; ++i) {
    const env::Observation& o = *observations[i];
    if (static_cast<std::size_t>(o.frame_size) != fs || o.goal_vector.size() != gs ||
        o.frames.size() != fs * env::kFrameStack) {
      throw ShapeError("make_batch: observation shapes differ");
    }
    for (int k = 0; k < env::kFrameStack; ++k) {
      std::copy(o.frame(k), o.frame(k) + fs, b.frames[k].data() + i * fs);
    }
    std::copy(o.goal_vector.begin(), o.goal_vector.end(), b.goals.data() + i * gs);
  }
  return b;
}

ObservationBatch make_batch(const env::Observation& observation) {
  const env::Observation* p = &observation;
  return make_batch(std::span<const env::Observation* const>(&p, 1));
}

FrameTower::FrameTower(const std::string& name, const ActorCriticConfig& cfg, Rng& rng)
    : pixels_(cfg.mode == env::ObservationMode::Pixels) {
  std::size_t encoded = static_cast<std::size_t>(cfg.frame_size);
  if (pixels_) {
    patches_ = nn::PatchEncoder(name + ".patches", env::kPixelSide, 3, static_cast<std::size_t>(cfg.patch),
                                static_cast<std::size_t>(cfg.patch_features), rng);
    encoded = patches_.output_size();
  }
  encoder_ = nn::Linear(name + ".encoder", encoded, static_cast<std::size_t>(cfg.embedding), rng);
  recurrence_ = nn::GruCell(name + ".gru", static_cast<std::size_t>(cfg.embedding),
                            static_cast<std::size_t>(cfg.hidden), rng);
}

nn::Var FrameTower::operator()(nn::Tape& tape, const ObservationBatch& batch) const {
  std::vector<nn::Var> steps;
  steps.reserve(batch.frames.size());
  for (const nn::Tensor& frame : batch.frames) {
    nn::Var x = tape.constant(frame);
    if (pixels_) x = patches_(tape, x);
    steps.push_back(nn::relu(encoder_(tape, x)));
  }
  return recurrence_.run(tape, steps);
}

std::vector<nn::Parameter*> FrameTower::parameters() {
  std::vector<nn::Parameter*> out;
  if (pixels_) out = patches_.parameters();
  for (auto* p : encoder_.parameters()) out.push_back(p);
  for (auto* p : recurrence_.parameters()) out.push_back(p);
  return out;
}

ActorCritic::ActorCritic(const ActorCriticConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto head_in = static_cast<std::size_t>(cfg.hidden + cfg.goal_size);
  if (cfg.shared_encoder) {
    actor_tower_ = FrameTower("eda.tower", cfg, rng);
  } else {
    actor_tower_ = FrameTower("eda.actor_tower", cfg, rng);
    critic_tower_.emplace("eda.critic_tower", cfg, rng);
  }
  actor_head_ = nn::Linear("eda.actor", head_in, env::kNumActions, rng);
  critic_head_ = nn::Linear("eda.critic", head_in, 1, rng);
  if (cfg.zero_init_actor) actor_head_.zero_init();
}

void ActorCritic::check(const ObservationBatch& batch) const {
  if (batch.frames.size() != static_cast<std::size_t>(env::kFrameStack)) {
    throw ShapeError("actor-critic expects " + std::to_string(env::kFrameStack) + " frames");
  }
  for (const nn::Tensor& f : batch.frames) {
    if (f.cols() != static_cast<std::size_t>(cfg_.frame_size) || f.rows() != batch.size()) {
      throw ShapeError("actor-critic frame shape " + f.shape_string() + ", expected frame size " +
                       std::to_string(cfg_.frame_size));
    }
  }
  if (batch.goals.cols() != static_cast<std::size_t>(cfg_.goal_size)) {
    throw ShapeError("actor-critic goal vector size " + std::to_string(batch.goals.cols()) + ", expected " +
                     std::to_string(cfg_.goal_size));
  }
}

ActorCritic::Output ActorCritic::forward(nn::Tape& tape, const ObservationBatch& batch) const {
  check(batch);
  const nn::Var goals = tape.constant(batch.goals);
  const nn::Var actor_features = nn::concat_cols({actor_tower_(tape, batch), goals});
  const nn::Var critic_features =
      critic_tower_ ? nn::concat_cols({(*critic_tower_)(tape, batch), goals}) : actor_features;
  return {actor_head_(tape, actor_features), critic_head_(tape, critic_features)};
}

std::vector<nn::Parameter*> ActorCritic::parameters() {
  std::vector<nn::Parameter*> out = actor_tower_.parameters();
  if (critic_tower_) {
    for (auto* p : critic_tower_->parameters()) out.push_back(p);
  }
  for (auto* p : actor_head_.parameters()) out.push_back(p);
  for (auto* p : critic_head_.parameters()) out.push_back(p);
  return out;
}

PolicyOutput action_distribution(const ActorCritic& model, const env::Observation& obs) {
  nn::Tape tape(false);
  const ActorCritic::Output out = model.forward(tape, make_batch(obs));
  const nn::Tensor probs = nn::softmax(out.logits).value();
  const nn::Tensor logp = nn::log_softmax(out.logits).value();
  const nn::Tensor& logits = out.logits.value();
  PolicyOutput p;
  for (int a = 0; a < env::kNumActions; ++a) {
    p.logits[a] = logits[a];
    p.probabilities[a] = probs[a];
    p.log_probabilities[a] = logp[a];
  }
  p.value = out.value.value()[0];
  return p;
}

}  // namespace a3ps::eda
