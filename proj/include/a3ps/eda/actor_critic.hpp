#pragma once

#include <optional>
#include <span>
#include <vector>

#include "a3ps/blend/blend.hpp"
#include "a3ps/env/frogger.hpp"
#include "a3ps/nn/layers.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::eda {

struct ActorCriticConfig {
  int frame_size = 0;
  int goal_size = 0;
  int embedding = 64;
  int hidden = 64;
  // Actor and critic share the frame encoder and recurrence when set.
  bool shared_encoder = true;
  // Zeroed actor head gives a uniform initial policy.
  bool zero_init_actor = true;
  env::ObservationMode mode = env::ObservationMode::Features;
  // Pixel mode only.
  int patch = 10;
  int patch_features = 4;

  static ActorCriticConfig for_env(const env::EnvConfig& cfg,
                                   env::ObservationMode mode = env::ObservationMode::Features);
  void validate() const;
};

// Observations stacked row-wise: frames[k] is B x frame_size for stack
// position k, goals is B x goal_size.
struct ObservationBatch {
  std::vector<nn::Tensor> frames;
  nn::Tensor goals;

  std::size_t size() const { return goals.rows(); }
};

ObservationBatch make_batch(std::span<const env::Observation* const> observations);
ObservationBatch make_batch(const env::Observation& observation);

// Frame encoder followed by a gated recurrence over the stacked frames.
class FrameTower {
 public:
  FrameTower() = default;
  FrameTower(const std::string& name, const ActorCriticConfig& cfg, Rng& rng);

  nn::Var operator()(nn::Tape& tape, const ObservationBatch& batch) const;
  std::vector<nn::Parameter*> parameters();

 private:
  bool pixels_ = false;
  nn::PatchEncoder patches_;
  nn::Linear encoder_;
  nn::GruCell recurrence_;
};

class ActorCritic {
 public:
  struct Output {
    nn::Var logits;  // B x 5
    nn::Var value;   // B x 1
  };

  ActorCritic(const ActorCriticConfig& cfg, Rng& rng);

  Output forward(nn::Tape& tape, const ObservationBatch& batch) const;
  std::vector<nn::Parameter*> parameters();
  const ActorCriticConfig& config() const { return cfg_; }

 private:
  void check(const ObservationBatch& batch) const;

  ActorCriticConfig cfg_;
  FrameTower actor_tower_;
  std::optional<FrameTower> critic_tower_;
  nn::Linear actor_head_;
  nn::Linear critic_head_;
};

struct PolicyOutput {
  blend::ActionScores logits{};  // A_exp
  blend::Probabilities probabilities{};
  blend::ActionScores log_probabilities{};
  double value = 0.0;
};

PolicyOutput action_distribution(const ActorCritic& model, const env::Observation& obs);

}  // namespace a3ps::eda
