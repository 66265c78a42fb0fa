#include <cmath>
#include <numeric>

#include "a3ps/eda/ppo.hpp"
#include "a3ps/errors.hpp"
#include "a3ps/nn/checkpoint.hpp"
#include "a3ps/nn/gradcheck.hpp"
#include "doctest.h"

using namespace a3ps;
using namespace a3ps::eda;
using env::Action;

namespace {

ActorCriticConfig tiny_config() {
  ActorCriticConfig c;
  c.frame_size = 6;
  c.goal_size = 2;
  c.embedding = 4;
  c.hidden = 3;
  c.zero_init_actor = false;
  return c;
}

env::Observation synthetic_obs(Rng& rng, int frame_size, int goal_size) {
  env::Observation o;
  o.frame_size = frame_size;
  o.frames.resize(static_cast<std::size_t>(frame_size) * env::kFrameStack);
  for (double& v : o.frames) v = rng.uniform(-1.0, 1.0);
  o.goal_vector.resize(static_cast<std::size_t>(goal_size));
  for (double& v : o.goal_vector) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return o;
}

// Discounted residual sum written out term by term.
std::vector<double> gae_by_hand(const std::vector<double>& rewards, const std::vector<double>& values,
                                const std::vector<int>& terminal, double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = terminal[t] ? 0.0 : (t + 1 < n ? values[t + 1] : last_value);
    delta[t] = rewards[t] + gamma * next - values[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += weight * delta[k];
      if (terminal[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

RolloutBuffer manual_buffer(const std::vector<double>& rewards, const std::vector<double>& values,
                            const std::vector<int>& terminal, double last_value) {
  RolloutBuffer b;
  for (std::size_t i = 0; i < rewards.size(); ++i) b.append({}, 0, 0.0, rewards[i], values[i], terminal[i] != 0);
  b.last_value = last_value;
  return b;
}

}  // namespace

TEST_CASE("zero-initialized actor head starts uniform") {
  const env::EnvConfig cfg = env::EnvConfig::standard();
  Rng rng(1);
  const ActorCritic model(ActorCriticConfig::for_env(cfg), rng);
  env::FroggerEnv e(cfg, env::RewardConfig::dense());
  const PolicyOutput p = action_distribution(model, e.reset(3));
  for (int a = 0; a < env::kNumActions; ++a) {
    CHECK(p.logits[a] == 0.0);
    CHECK(p.probabilities[a] == doctest::Approx(0.2).epsilon(1e-15));
  }
  CHECK(std::isfinite(p.value));
}

TEST_CASE("action distribution is pure and normalized") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    ActorCriticConfig c = tiny_config();
    const ActorCritic model(c, rng);
    const env::Observation o = synthetic_obs(rng, c.frame_size, c.goal_size);
    const PolicyOutput a = action_distribution(model, o);
    const PolicyOutput b = action_distribution(model, o);
    CHECK(a.logits == b.logits);
    CHECK(a.probabilities == b.probabilities);
    CHECK(a.value == b.value);
    const double sum = std::accumulate(a.probabilities.begin(), a.probabilities.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(3);
  const ActorCritic model(tiny_config(), rng);
  CHECK_THROWS_AS(action_distribution(model, synthetic_obs(rng, 7, 2)), ShapeError);
  CHECK_THROWS_AS(action_distribution(model, synthetic_obs(rng, 6, 3)), ShapeError);
}

TEST_CASE("pixel observations run through the patch encoder") {
  const env::EnvConfig cfg = env::EnvConfig::standard();
  Rng rng(4);
  ActorCriticConfig c = ActorCriticConfig::for_env(cfg, env::ObservationMode::Pixels);
  c.zero_init_actor = false;
  const ActorCritic model(c, rng);
  env::FroggerEnv e(cfg, env::RewardConfig::dense(), env::ObservationMode::Pixels);
  const PolicyOutput p = action_distribution(model, e.reset(0));
  CHECK(std::abs(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("separate encoders have their own parameters") {
  Rng rng(5);
  ActorCriticConfig c = tiny_config();
  ActorCritic shared(c, rng);
  c.shared_encoder = false;
  ActorCritic split(c, rng);
  CHECK(split.parameters().size() > shared.parameters().size());
}

TEST_CASE("collect_rollout plumbing") {
  const env::EnvConfig cfg = env::EnvConfig::standard();
  Rng init(6);
  ActorCriticConfig c = ActorCriticConfig::for_env(cfg);
  c.zero_init_actor = false;
  const ActorCritic model(c, init);

  env::FroggerEnv e1(cfg, env::RewardConfig::dense());
  EpisodeStream s1{&e1, 77, 0};
  Rng r0(1);
  CHECK(collect_rollout(s1, model, 0, {}, r0).empty());

  Rng r1(9), r2(9);
  env::FroggerEnv e2(cfg, env::RewardConfig::dense());
  EpisodeStream s2{&e2, 77, 0};
  s1 = EpisodeStream{&e1, 77, 0};
  e1 = env::FroggerEnv(cfg, env::RewardConfig::dense());
  const RolloutBuffer a = collect_rollout(s1, model, 300, {}, r1);
  const RolloutBuffer b = collect_rollout(s2, model, 300, {}, r2);
  CHECK(a.size() == 300);
  CHECK(a.observations == b.observations);
  CHECK(a.actions == b.actions);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.rewards == b.rewards);
  CHECK(a.terminals == b.terminals);
  CHECK(a.last_value == b.last_value);

  // Every terminal record is followed by the reset observation of the next
  // episode seed.
  std::int64_t episode = 0;
  env::FroggerEnv probe(cfg, env::RewardConfig::dense());
  CHECK(a.observations[0] == probe.reset(mix_seed(77, 0)));
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    if (!a.terminals[i]) continue;
    ++episode;
    CHECK(a.observations[i + 1] == probe.reset(mix_seed(77, static_cast<std::uint64_t>(episode))));
  }
  CHECK(episode + 1 == s1.episodes_started);
  CHECK(episode > 0);
}

TEST_CASE("GAE base cases") {
  PpoConfig cfg;
  RolloutBuffer zeros = manual_buffer({0, 0, 0}, {0, 0, 0}, {0, 0, 1}, 0.0);
  compute_advantages(zeros, cfg);
  for (double a : zeros.advantages) CHECK(a == 0.0);

  RolloutBuffer one = manual_buffer({3.5}, {1.25}, {1}, 99.0);
  compute_advantages(one, cfg);
  CHECK(one.advantages[0] == 3.5 - 1.25);
  CHECK(one.returns[0] == 3.5);
}

TEST_CASE("GAE matches the unrolled residual sum") {
  PpoConfig cfg;
  cfg.gamma = 0.5;
  cfg.gae_lambda = 1.0;
  RolloutBuffer b = manual_buffer({1, 2, 3}, {0.5, 1.0, 1.5}, {0, 0, 1}, 0.0);
  compute_advantages(b, cfg);
  // With lambda = 1 the estimate is the discounted return minus the value.
  CHECK(b.advantages[2] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(b.advantages[1] == doctest::Approx(2.0 + 0.5 * 3.0 - 1.0).epsilon(1e-15));
  CHECK(b.advantages[0] == doctest::Approx(1.0 + 0.5 * 2.0 + 0.25 * 3.0 - 0.5).epsilon(1e-15));

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> r(n), v(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rng.uniform(-5, 5);
      v[i] = rng.uniform(-5, 5);
      t[i] = rng.uniform() < 0.25;
    }
    const double last = rng.uniform(-5, 5);
    PpoConfig c;
    c.gamma = rng.uniform(0.5, 1.0);
    c.gae_lambda = rng.uniform(0.0, 1.0);
    RolloutBuffer buf = manual_buffer(r, v, t, last);
    compute_advantages(buf, c);
    const std::vector<double> expected = gae_by_hand(r, v, t, last, c.gamma, c.gae_lambda);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(buf.advantages[i] == doctest::Approx(expected[i]).epsilon(1e-12));
      CHECK(buf.returns[i] == doctest::Approx(expected[i] + v[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("reward scale is the same as scaling the rewards") {
  PpoConfig c;
  c.reward_scale = 0.25;
  RolloutBuffer scaled = manual_buffer({4, -8, 400}, {0.5, 1.0, 1.5}, {0, 0, 1}, 0.0);
  compute_advantages(scaled, c);
  RolloutBuffer plain = manual_buffer({1, -2, 100}, {0.5, 1.0, 1.5}, {0, 0, 1}, 0.0);
  compute_advantages(plain, PpoConfig{});
  CHECK(scaled.advantages == plain.advantages);
  CHECK(scaled.returns == plain.returns);
}

TEST_CASE("clipped surrogate hand cases") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == 1.2);
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == -0.8);
  CHECK(clipped_surrogate(1.1, 1.0, 0.2) == 1.1);
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == 0.5);
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform(0.0, 3.0);
    const double a = rng.uniform(-2.0, 2.0);
    const double s = clipped_surrogate(r, a, 0.2);
    CHECK(s <= std::max(r * a, std::clamp(r, 0.8, 1.2) * a));
    if (a > 0) CHECK(s <= r * a);
  }
}

TEST_CASE("PPO loss evaluates the clipped branches exactly") {
  // Zero actor head: every log-probability is log(0.2).
  Rng rng(11);
  ActorCriticConfig c = tiny_config();
  c.zero_init_actor = true;
  const ActorCritic model(c, rng);
  const env::Observation o = synthetic_obs(rng, c.frame_size, c.goal_size);
  const double logp = std::log(0.2);
  PpoConfig cfg;
  cfg.entropy_coeff = 0.0;
  cfg.value_loss_coeff = 0.0;

  RolloutBuffer b;
  b.append(o, 0, logp - std::log(1.5), 0.0, 0.0, true);
  b.append(o, 1, logp - std::log(0.5), 0.0, 0.0, true);
  compute_advantages(b, cfg);
  const std::vector<std::size_t> first{0}, second{1};
  const std::vector<double> plus{1.0, -1.0};

  nn::Tape t1;
  const PpoLoss l1 = ppo_loss(t1, model, b, first, plus, cfg);
  CHECK(l1.ratio.value()[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(l1.policy.value().item() == -1.2);

  nn::Tape t2;
  const PpoLoss l2 = ppo_loss(t2, model, b, second, plus, cfg);
  CHECK(l2.ratio.value()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l2.policy.value().item() == 0.8);
}

TEST_CASE("ratios are exactly one before any update") {
  const env::EnvConfig cfg = env::EnvConfig::standard();
  Rng init(12);
  ActorCriticConfig c = ActorCriticConfig::for_env(cfg);
  c.zero_init_actor = false;
  const ActorCritic model(c, init);
  env::FroggerEnv e(cfg, env::RewardConfig::dense());
  EpisodeStream stream{&e, 5, 0};
  Rng rng(13);

  ActingOptions shaped;
  shaped.alpha = 0.5;
  shaped.advice = [](const env::GridState&, const env::Observation&) {
    return blend::ActionScores{3.0, 0.0, -1.0, 0.5, 0.0};
  };
  for (const ActingOptions& opts : {ActingOptions{}, shaped}) {
    RolloutBuffer b = collect_rollout(stream, model, 200, opts, rng);
    for (RatioTarget target : {RatioTarget::Behavior, RatioTarget::Eda}) {
      PpoConfig pc;
      pc.ratio_target = target;
      compute_advantages(b, pc);
      std::vector<std::size_t> all(b.size());
      std::iota(all.begin(), all.end(), 0);
      const std::vector<double> adv = normalize(b.advantages);
      nn::Tape tape;
      const PpoLoss loss = ppo_loss(tape, model, b, all, adv, pc);
      for (double r : loss.ratio.value().values()) CHECK(r == 1.0);
    }
  }
}

TEST_CASE("blended decisions record both log-probabilities") {
  const env::EnvConfig cfg = env::EnvConfig::standard();
  Rng init(15);
  ActorCriticConfig c = ActorCriticConfig::for_env(cfg);
  c.zero_init_actor = false;
  const ActorCritic model(c, init);
  env::FroggerEnv e(cfg, env::RewardConfig::dense());
  const env::Observation& o = e.reset(3);
  const blend::ActionScores advice{2.0, -1.0, 0.5, 0.0, 1.0};
  ActingOptions shaped;
  shaped.alpha = 0.4;
  shaped.advice = [&](const env::GridState&, const env::Observation&) { return advice; };
  Rng rng(16);
  for (int i = 0; i < 20; ++i) {
    const Decision d = decide(model, e.state(), o, shaped, rng);
    const int a = env::index_of(d.action);
    CHECK(d.alpha == 0.4);
    CHECK(d.advice == advice);
    CHECK(d.log_prob == doctest::Approx(std::log(d.policy.probabilities[a])).epsilon(1e-12));
    CHECK(d.behavior_log_prob == doctest::Approx(std::log(d.behavior[a])).epsilon(1e-12));
  }
  const Decision plain = decide(model, e.state(), o, ActingOptions{}, rng);
  CHECK(plain.alpha == 0.0);
  CHECK(plain.behavior_log_prob == plain.log_prob);
}

TEST_CASE("full PPO loss gradient matches finite differences") {
  Rng rng(14);
  ActorCriticConfig c = tiny_config();
  ActorCritic model(c, rng);
  RolloutBuffer b;
  for (int i = 0; i < 12; ++i) {
    const env::Observation o = synthetic_obs(rng, c.frame_size, c.goal_size);
    const int action = static_cast<int>(rng.below(5));
    const double logp = action_distribution(model, o).log_probabilities[action];
    // Spread ratios across both clipping regimes.
    b.append(o, action, logp + rng.uniform(-0.4, 0.4), rng.uniform(-1, 1), rng.uniform(-1, 1), i % 4 == 3);
    // Half the records carry a blend so the advice path is differentiated too.
    if (i % 2 == 0) {
      b.alphas.back() = rng.uniform(0.1, 0.9);
      for (double& v : b.advice.back()) v = rng.uniform(-2, 2);
      b.behavior_log_probs.back() = logp + rng.uniform(-0.4, 0.4);
    }
  }
  const std::vector<nn::Parameter*> params = model.parameters();
  for (RatioTarget target : {RatioTarget::Behavior, RatioTarget::Eda}) {
    PpoConfig pc;
    pc.ratio_target = target;
    compute_advantages(b, pc);
    const std::vector<double> adv = normalize(b.advantages);
    std::vector<std::size_t> all(b.size());
    std::iota(all.begin(), all.end(), 0);
    nn::GradCheckOptions opts;
    opts.step = 1e-6;
    const double err = nn::gradient_check(
        [&](nn::Tape& tape) { return ppo_loss(tape, model, b, all, adv, pc).total; }, params, opts);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("PPO learns a two-state bandit") {
  // One-step episodes; the rewarding action differs between the states.
  const std::array<Action, 2> rewarding{Action::Right, Action::Left};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    ActorCriticConfig c;
    c.frame_size = 4;
    c.goal_size = 1;
    c.embedding = 8;
    c.hidden = 8;
    ActorCritic model(c, rng);
    std::array<env::Observation, 2> states;
    for (int s = 0; s < 2; ++s) {
      states[s].frame_size = 4;
      states[s].frames.assign(16, 0.0);
      for (int k = 0; k < env::kFrameStack; ++k) states[s].frames[static_cast<std::size_t>(k) * 4 + s] = 1.0;
      states[s].goal_vector = {1.0};
    }
    PpoConfig pc;
    pc.rollout_length = 64;
    pc.minibatch_size = 16;
    nn::AdamState opt = make_optimizer(model, pc);
    auto solved = [&] {
      for (int s = 0; s < 2; ++s) {
        const PolicyOutput p = action_distribution(model, states[s]);
        if (blend::select_action(p.probabilities, blend::SelectMode::Greedy, rng) != rewarding[s]) return false;
      }
      return true;
    };
    int updates = 0;
    while (!solved() && updates < 200) {
      RolloutBuffer b;
      for (int i = 0; i < pc.rollout_length; ++i) {
        const auto s = static_cast<std::size_t>(rng.below(2));
        const Decision d = decide(model, {}, states[s], {}, rng);
        b.append(states[s], env::index_of(d.action), d.log_prob, d.action == rewarding[s] ? 1.0 : 0.0, d.value,
                 true);
      }
      compute_advantages(b, pc);
      ppo_update(model, b, pc, opt, rng);
      ++updates;
    }
    CAPTURE(seed);
    CAPTURE(updates);
    CHECK(solved());
  }
}

TEST_CASE("non-finite loss restores the model") {
  Rng rng(15);
  ActorCriticConfig c = tiny_config();
  ActorCritic model(c, rng);
  RolloutBuffer b;
  for (int i = 0; i < 8; ++i) {
    const env::Observation o = synthetic_obs(rng, c.frame_size, c.goal_size);
    b.append(o, 0, std::log(0.2), 0.0, 0.0, true);
  }
  PpoConfig pc;
  pc.minibatch_size = 4;
  pc.rollout_length = 8;
  compute_advantages(b, pc);
  b.returns[5] = 1e300;
  nn::AdamState opt = make_optimizer(model, pc);
  const std::vector<nn::Parameter*> params = model.parameters();
  const std::uint64_t before = nn::parameter_checksum(params);
  CHECK_THROWS_AS(ppo_update(model, b, pc, opt, rng), NumericError);
  CHECK(nn::parameter_checksum(params) == before);
  CHECK(opt.step == 0);
}

TEST_CASE("PPO config invariants") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.clip_epsilon = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.rollout_length = 32;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.reward_scale = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
