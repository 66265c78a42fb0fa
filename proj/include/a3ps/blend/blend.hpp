#pragma once

#include <array>
#include <cstdint>

#include "a3ps/env/frogger.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::blend {

// Pre-softmax utilities indexed by env::Action.
using ActionScores = std::array<double, env::kNumActions>;
using Probabilities = std::array<double, env::kNumActions>;

// Step-decayed blend weight: alpha0 - decay_step * floor(episode / interval),
// never below floor.
struct AlphaSchedule {
  double alpha0 = 0.6;
  double decay_step = 0.2;
  std::int64_t decay_interval = 2000;
  double floor = 0.0;

  void validate() const;
};

double alpha_at(const AlphaSchedule& schedule, std::int64_t episode);

Probabilities softmax(const ActionScores& scores);
Probabilities log_softmax(const ActionScores& scores);

// softmax(alpha * advice + (1 - alpha) * experience)
Probabilities blend(const ActionScores& advice, const ActionScores& experience, double alpha);

enum class SelectMode { Sample, Greedy };

// Greedy breaks ties toward the lower action index.
env::Action select_action(const Probabilities& probabilities, SelectMode mode, Rng& rng);

}  // namespace a3ps::blend
