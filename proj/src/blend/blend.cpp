#include "a3ps/blend/blend.hpp"

#include <algorithm>
#include <cmath>

#include "a3ps/errors.hpp"

namespace a3ps::blend {

void AlphaSchedule::validate() const {
  if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw ConfigError("alpha0 must lie in [0, 1]");
  if (!(decay_step >= 0.0)) throw ConfigError("alpha decay step must be non-negative");
  if (decay_interval < 1) throw ConfigError("alpha decay interval must be >= 1 episode");
  if (!(floor >= 0.0 && floor <= alpha0)) throw ConfigError("alpha floor must lie in [0, alpha0]");
}

double alpha_at(const AlphaSchedule& s, std::int64_t episode) {
  if (episode < 0) throw ContractError("alpha_at: negative episode");
  const auto decays = static_cast<double>(episode / s.decay_interval);
  return std::max(s.floor, s.alpha0 - s.decay_step * decays);
}

Probabilities softmax(const ActionScores& scores) {
  for (double v : scores) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite action score");
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  Probabilities p{};
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(std::max(scores[i] - m, -80.0));
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Probabilities log_softmax(const ActionScores& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double v : scores) z += std::exp(v - m);
  const double lse = m + std::log(z);
  Probabilities out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i] - lse;
  return out;
}

Probabilities blend(const ActionScores& advice, const ActionScores& experience, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("blend: alpha outside [0, 1]");
  ActionScores mixed{};
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    if (!std::isfinite(advice[i]) || !std::isfinite(experience[i])) {
      throw NumericError("blend: non-finite action score");
    }
    mixed[i] = alpha * advice[i] + (1.0 - alpha) * experience[i];
  }
  return softmax(mixed);
}

env::Action select_action(const Probabilities& p, SelectMode mode, Rng& rng) {
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw ContractError("select_action: invalid probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ContractError("select_action: probabilities do not sum to 1");

  if (mode == SelectMode::Greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    return env::action_at(static_cast<int>(best));
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return env::action_at(static_cast<int>(i));
  }
  return env::action_at(static_cast<int>(last));
}

}  // namespace a3ps::blend
