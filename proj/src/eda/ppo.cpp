#include "a3ps/eda/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "a3ps/errors.hpp"
#include "a3ps/nn/checkpoint.hpp"
#include "a3ps/nn/ops.hpp"

namespace a3ps::eda {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("clip_epsilon must lie in (0, 1)");
  if (epochs_per_update < 1) throw ConfigError("epochs_per_update must be >= 1");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (rollout_length < minibatch_size) throw ConfigError("rollout_length must be >= minibatch_size");
  if (!(value_loss_coeff >= 0.0) || !(entropy_coeff >= 0.0)) throw ConfigError("loss coefficients must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) throw ConfigError("reward_scale must be positive");
}

void RolloutBuffer::append(env::Observation obs, int action, double log_prob, double reward, double value,
                           bool terminal) {
  observations.push_back(std::move(obs));
  actions.push_back(action);
  log_probs.push_back(log_prob);
  behavior_log_probs.push_back(log_prob);
  alphas.push_back(0.0);
  advice.push_back({});
  rewards.push_back(reward);
  values.push_back(value);
  terminals.push_back(terminal ? 1 : 0);
}

void RolloutBuffer::append(env::Observation obs, const Decision& d, double reward, bool terminal) {
  append(std::move(obs), env::index_of(d.action), d.log_prob, reward, d.value, terminal);
  behavior_log_probs.back() = d.behavior_log_prob;
  alphas.back() = d.alpha;
  advice.back() = d.advice;
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

void RolloutBuffer::check() const {
  const std::size_t n = actions.size();
  if (observations.size() != n || log_probs.size() != n || behavior_log_probs.size() != n || alphas.size() != n ||
      advice.size() != n || rewards.size() != n || values.size() != n || terminals.size() != n) {
    throw ContractError("rollout buffer arrays differ in length");
  }
  if (!advantages.empty() && (advantages.size() != n || returns.size() != n)) {
    throw ContractError("rollout buffer advantages differ in length");
  }
}

Decision decide(const ActorCritic& model, const env::GridState& state, const env::Observation& obs,
                const ActingOptions& options, Rng& rng) {
  Decision d;
  d.policy = action_distribution(model, obs);
  d.value = d.policy.value;
  if (options.alpha > 0.0 && options.advice) {
    d.alpha = options.alpha;
    d.advice = options.advice(state, obs);
    d.behavior = blend::blend(d.advice, d.policy.logits, options.alpha);
  } else {
    d.behavior = blend::softmax(d.policy.logits);
  }
  d.action = blend::select_action(d.behavior, options.mode, rng);
  const int a = env::index_of(d.action);
  d.log_prob = d.policy.log_probabilities[a];
  if (d.alpha > 0.0) {
    // Same arithmetic as the blended branch of ppo_loss, so the ratio starts
    // at exactly 1.
    nn::Tensor mixed = nn::Tensor::zeros(1, env::kNumActions);
    for (int j = 0; j < env::kNumActions; ++j) {
      mixed[j] = d.policy.logits[j] * (1.0 - d.alpha) + d.alpha * d.advice[j];
    }
    nn::Tape tape(false);
    d.behavior_log_prob = nn::log_softmax(tape.constant(std::move(mixed))).value()[a];
  } else {
    d.behavior_log_prob = d.log_prob;
  }
  return d;
}

EpisodeResult run_episode(env::FroggerEnv& env, const ActorCritic& model, std::uint64_t seed,
                          const ActingOptions& options, Rng& rng, RolloutBuffer* buffer) {
  env.reset(seed);
  EpisodeResult result;
  while (!env.needs_reset()) {
    const Decision d = decide(model, env.state(), env.observation(), options, rng);
    env::Observation obs = buffer ? env.observation() : env::Observation{};
    const env::StepOutcome out = env.step(d.action);
    result.reward += out.reward;
    ++result.steps;
    if (out.has(env::EventKind::ReachedGoal)) result.reached_goal = true;
    if (buffer) buffer->append(std::move(obs), d, out.reward, out.terminal);
  }
  return result;
}

RolloutBuffer collect_rollout(EpisodeStream& stream, const ActorCritic& model, std::size_t length,
                              const ActingOptions& options, Rng& rng) {
  if (!stream.env) throw ContractError("collect_rollout: no environment");
  env::FroggerEnv& env = *stream.env;
  RolloutBuffer buffer;
  for (std::size_t i = 0; i < length; ++i) {
    if (env.needs_reset()) env.reset(mix_seed(stream.seed, static_cast<std::uint64_t>(stream.episodes_started++)));
    const Decision d = decide(model, env.state(), env.observation(), options, rng);
    env::Observation obs = env.observation();
    const env::StepOutcome out = env.step(d.action);
    buffer.append(std::move(obs), d, out.reward, out.terminal);
  }
  if (!buffer.empty() && !buffer.terminals.back()) {
    buffer.last_value = action_distribution(model, env.observation()).value;
  }
  return buffer;
}

void compute_advantages(RolloutBuffer& buffer, const PpoConfig& cfg) {
  buffer.check();
  const std::size_t n = buffer.size();
  buffer.advantages.assign(n, 0.0);
  buffer.returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const bool terminal = buffer.terminals[i] != 0;
    const double next_value = terminal ? 0.0 : (i + 1 < n ? buffer.values[i + 1] : buffer.last_value);
    const double delta = cfg.reward_scale * buffer.rewards[i] + cfg.gamma * next_value - buffer.values[i];
    gae = delta + (terminal ? 0.0 : cfg.gamma * cfg.gae_lambda * gae);
    buffer.advantages[i] = gae;
    buffer.returns[i] = gae + buffer.values[i];
  }
}

std::vector<double> normalize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double n = static_cast<double>(out.size());
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (double& v : out) v = (v - mean) / sd;
  return out;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

PpoLoss ppo_loss(nn::Tape& tape, const ActorCritic& model, const RolloutBuffer& buffer,
                 std::span<const std::size_t> indices, std::span<const double> advantages, const PpoConfig& cfg) {
  if (indices.empty()) throw ContractError("ppo_loss: empty minibatch");
  if (buffer.returns.size() != buffer.size()) throw ContractError("ppo_loss: advantages not computed");
  const std::size_t b = indices.size();
  std::vector<const env::Observation*> obs(b);
  std::vector<int> actions(b);
  const bool behavior = cfg.ratio_target == RatioTarget::Behavior;
  nn::Tensor old_logp = nn::Tensor::zeros(b, 1);
  nn::Tensor adv = nn::Tensor::zeros(b, 1);
  nn::Tensor ret = nn::Tensor::zeros(b, 1);
  nn::Tensor keep = nn::Tensor::zeros(b, env::kNumActions);
  nn::Tensor shift = nn::Tensor::zeros(b, env::kNumActions);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t k = indices[i];
    obs[i] = &buffer.observations.at(k);
    actions[i] = buffer.actions[k];
    old_logp[i] = behavior ? buffer.behavior_log_probs[k] : buffer.log_probs[k];
    adv[i] = advantages[k];
    ret[i] = buffer.returns[k];
    const double alpha = behavior ? buffer.alphas[k] : 0.0;
    for (int j = 0; j < env::kNumActions; ++j) {
      keep(i, j) = 1.0 - alpha;
      shift(i, j) = alpha * buffer.advice[k][j];
    }
  }

  const ActorCritic::Output out = model.forward(tape, make_batch(obs));
  const nn::Var logits = nn::add(nn::mul(out.logits, tape.constant(std::move(keep))), tape.constant(std::move(shift)));
  const nn::Var logp_all = nn::log_softmax(logits);
  const nn::Var logp = nn::gather_cols(logp_all, actions);
  const nn::Var ratio = nn::exp(nn::sub(logp, tape.constant(std::move(old_logp))));
  const nn::Var a = tape.constant(std::move(adv));
  const nn::Var unclipped = nn::mul(ratio, a);
  const nn::Var clipped = nn::mul(nn::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon), a);
  const nn::Var policy = nn::scale(nn::mean(nn::minimum(unclipped, clipped)), -1.0);
  const nn::Var value = nn::mean(nn::square(nn::sub(out.value, tape.constant(std::move(ret)))));
  const nn::Var probs = nn::softmax(logits);
  const nn::Var entropy = nn::scale(nn::mean(nn::sum_cols(nn::mul(probs, logp_all))), -1.0);
  const nn::Var total = nn::sub(nn::add(policy, nn::scale(value, cfg.value_loss_coeff)),
                                nn::scale(entropy, cfg.entropy_coeff));
  return {total, policy, value, entropy, ratio};
}

nn::AdamState make_optimizer(ActorCritic& model, const PpoConfig& cfg) {
  nn::AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  const std::vector<nn::Parameter*> params = model.parameters();
  return nn::AdamState(params, ac);
}

PpoStats ppo_update(ActorCritic& model, const RolloutBuffer& buffer, const PpoConfig& cfg, nn::AdamState& optimizer,
                    Rng& rng) {
  cfg.validate();
  buffer.check();
  if (buffer.empty()) throw ContractError("ppo_update: empty buffer");
  if (buffer.advantages.size() != buffer.size()) throw ContractError("ppo_update: advantages not computed");

  const std::vector<nn::Parameter*> params = model.parameters();
  const std::vector<nn::NamedTensor> saved_params = nn::snapshot(params);
  const nn::AdamState saved_optimizer = optimizer;

  const std::vector<double> adv = normalize(buffer.advantages);
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  const auto mb = static_cast<std::size_t>(cfg.minibatch_size);

  PpoStats stats;
  std::size_t samples = 0;
  std::size_t clipped = 0;
  try {
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      rng.shuffle(order.begin(), order.end());
      for (std::size_t start = 0; start < order.size(); start += mb) {
        const std::size_t len = std::min(mb, order.size() - start);
        const std::span<const std::size_t> idx(order.data() + start, len);
        nn::Tape tape;
        const PpoLoss loss = ppo_loss(tape, model, buffer, idx, adv, cfg);
        for (double r : loss.ratio.value().values()) {
          stats.mean_ratio += r;
          if (r < 1.0 - cfg.clip_epsilon || r > 1.0 + cfg.clip_epsilon) ++clipped;
        }
        samples += len;
        stats.policy_loss += loss.policy.value().item();
        stats.value_loss += loss.value.value().item();
        stats.entropy += loss.entropy.value().item();
        stats.total_loss += loss.total.value().item();
        ++stats.minibatches;
        tape.backward(loss.total);
        nn::adam_step(params, optimizer);
      }
    }
  } catch (const NumericError&) {
    nn::restore(params, saved_params);
    optimizer = saved_optimizer;
    nn::zero_grad(params);
    throw;
  }
  const double m = static_cast<double>(stats.minibatches);
  stats.mean_ratio /= static_cast<double>(samples);
  stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples);
  stats.policy_loss /= m;
  stats.value_loss /= m;
  stats.entropy /= m;
  stats.total_loss /= m;
  return stats;
}

}  // namespace a3ps::eda
