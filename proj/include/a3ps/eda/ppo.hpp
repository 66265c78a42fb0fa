#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "a3ps/blend/blend.hpp"
#include "a3ps/eda/actor_critic.hpp"
#include "a3ps/env/frogger.hpp"
#include "a3ps/nn/adam.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::eda {

// Distribution whose log-probabilities enter the importance ratio.
// Behavior uses the blended acting distribution with gradients through the
// EDA share; Eda uses the EDA policy alone.
enum class RatioTarget { Behavior, Eda };

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  int epochs_per_update = 4;
  int minibatch_size = 64;
  int rollout_length = 256;
  double value_loss_coeff = 0.5;
  double entropy_coeff = 0.01;
  double learning_rate = 1e-4;
  // Multiplies environment rewards before advantage estimation.
  double reward_scale = 1.0;
  RatioTarget ratio_target = RatioTarget::Behavior;

  void validate() const;
};

// Advice scores for the current state, used to shape action selection.
using AdviceFn = std::function<blend::ActionScores(const env::GridState&, const env::Observation&)>;

struct ActingOptions {
  blend::SelectMode mode = blend::SelectMode::Sample;
  double alpha = 0.0;
  // Consulted only when alpha > 0.
  AdviceFn advice;
};

struct Decision {
  env::Action action = env::Action::NoOp;
  double log_prob = 0.0;           // under the EDA policy alone
  double behavior_log_prob = 0.0;  // under the acting distribution
  double value = 0.0;
  double alpha = 0.0;
  blend::ActionScores advice{};
  blend::Probabilities behavior{};
  PolicyOutput policy;
};

struct RolloutBuffer {
  std::vector<env::Observation> observations;
  std::vector<int> actions;
  // Log-probability of the taken action at collection time, under the EDA
  // policy alone and under the acting distribution.
  std::vector<double> log_probs;
  std::vector<double> behavior_log_probs;
  // Blend weight and advice scores in force at each step (alpha 0 when
  // acting on the EDA alone).
  std::vector<double> alphas;
  std::vector<blend::ActionScores> advice;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> terminals;
  std::vector<double> advantages;
  std::vector<double> returns;
  // Value of the state following the last record when it is not terminal.
  double last_value = 0.0;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  void append(env::Observation obs, int action, double log_prob, double reward, double value, bool terminal);
  // Records a decision; the log-probabilities, value and blend come from d.
  void append(env::Observation obs, const Decision& d, double reward, bool terminal);
  void clear();
  // Throws ContractError when the per-step arrays disagree in length.
  void check() const;
};

Decision decide(const ActorCritic& model, const env::GridState& state, const env::Observation& obs,
                const ActingOptions& options, Rng& rng);

struct EpisodeResult {
  double reward = 0.0;
  int steps = 0;
  bool reached_goal = false;
};

// Plays one episode from reset(seed); records every transition when buffer
// is non-null.
EpisodeResult run_episode(env::FroggerEnv& env, const ActorCritic& model, std::uint64_t seed,
                          const ActingOptions& options, Rng& rng, RolloutBuffer* buffer);

// Episode seeds for auto-reset are mix_seed(seed, episode index).
struct EpisodeStream {
  env::FroggerEnv* env = nullptr;
  std::uint64_t seed = 0;
  std::int64_t episodes_started = 0;
};

// Steps the stream length times, resetting on termination. The trailing
// bootstrap value is filled when the last record is not terminal.
RolloutBuffer collect_rollout(EpisodeStream& stream, const ActorCritic& model, std::size_t length,
                              const ActingOptions& options, Rng& rng);

// Generalized advantage estimation; terminal records cut bootstrapping.
void compute_advantages(RolloutBuffer& buffer, const PpoConfig& cfg);

// Mean 0, standard deviation 1 (standard deviation floored at 1e-8).
std::vector<double> normalize(std::span<const double> values);

// min(r * A, clamp(r, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct PpoLoss {
  nn::Var total;
  nn::Var policy;
  nn::Var value;
  nn::Var entropy;
  nn::Var ratio;  // B x 1
};

// Loss over the selected buffer records; advantages are supplied already
// normalized.
PpoLoss ppo_loss(nn::Tape& tape, const ActorCritic& model, const RolloutBuffer& buffer,
                 std::span<const std::size_t> indices, std::span<const double> advantages, const PpoConfig& cfg);

struct PpoStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  int minibatches = 0;
};

nn::AdamState make_optimizer(ActorCritic& model, const PpoConfig& cfg);

// Epochs of shuffled minibatch updates, one Adam step per minibatch. A
// non-finite loss restores parameters and optimizer state and throws
// NumericError.
PpoStats ppo_update(ActorCritic& model, const RolloutBuffer& buffer, const PpoConfig& cfg, nn::AdamState& optimizer,
                    Rng& rng);

}  // namespace a3ps::eda
