#include <cmath>
#include <vector>

#include "a3ps/blend/blend.hpp"
#include "a3ps/errors.hpp"
#include "doctest.h"

using a3ps::ConfigError;
using a3ps::ContractError;
using a3ps::NumericError;
using a3ps::Rng;
namespace env = a3ps::env;
using a3ps::blend::ActionScores;
using a3ps::blend::AlphaSchedule;
using a3ps::blend::Probabilities;
using a3ps::blend::SelectMode;
using a3ps::blend::alpha_at;
using a3ps::blend::blend;
using a3ps::blend::select_action;
using a3ps::blend::softmax;
using env::Action;

namespace {

ActionScores random_scores(Rng& rng, double scale = 5.0) {
  ActionScores s{};
  for (double& v : s) v = rng.uniform(-scale, scale);
  return s;
}

std::size_t argmax(const Probabilities& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

// Reference evaluation straight from the definition, no max shift.
Probabilities naive_blend(const ActionScores& adv, const ActionScores& exp_scores, double alpha) {
  Probabilities p{};
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(alpha * adv[i] + (1.0 - alpha) * exp_scores[i]);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

TEST_CASE("blend reduces to either input at the endpoints") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const ActionScores adv = random_scores(rng);
    const ActionScores exp_scores = random_scores(rng);
    CHECK(blend(adv, exp_scores, 1.0) == softmax(adv));
    CHECK(blend(adv, exp_scores, 0.0) == softmax(exp_scores));
  }
}

TEST_CASE("symmetric inputs at one half") {
  const Probabilities p = blend({2, 0, 0, 0, 0}, {0, 2, 0, 0, 0}, 0.5);
  CHECK(p[0] == p[1]);
  CHECK(p[2] == p[3]);
  CHECK(p[3] == p[4]);
  const double e = std::exp(1.0);
  CHECK(p[0] == doctest::Approx(e / (2 * e + 3)).epsilon(1e-14));
}

TEST_CASE("blend matches the unshifted definition and is shift invariant") {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const ActionScores adv = random_scores(rng);
    const ActionScores exp_scores = random_scores(rng);
    const double alpha = rng.uniform();
    const Probabilities p = blend(adv, exp_scores, alpha);
    const Probabilities ref = naive_blend(adv, exp_scores, alpha);

    const double c = rng.uniform(-100.0, 100.0);
    ActionScores adv_c = adv, exp_c = exp_scores;
    for (double& v : adv_c) v += c;
    for (double& v : exp_c) v += c;
    const Probabilities shifted = blend(adv_c, exp_c, alpha);

    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(p[i] - ref[i]) < 1e-12);
      CHECK(std::abs(p[i] - shifted[i]) < 1e-9);
      CHECK(p[i] >= 0.0);
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("argmax hands over from advice to experience") {
  Rng rng(13);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const ActionScores adv = random_scores(rng);
    const ActionScores exp_scores = random_scores(rng);
    const std::size_t a = argmax(softmax(adv));
    const std::size_t e = argmax(softmax(exp_scores));
    CHECK(argmax(blend(adv, exp_scores, 1.0)) == a);
    CHECK(argmax(blend(adv, exp_scores, 0.0)) == e);
    // Margins of the uniform draws keep 1% perturbations from flipping.
    auto margin = [](const ActionScores& s, std::size_t best) {
      double m = 1e300;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i != best) m = std::min(m, s[best] - s[i]);
      }
      return m;
    };
    if (margin(adv, a) > 0.5 && margin(exp_scores, e) > 0.5) {
      CHECK(argmax(blend(adv, exp_scores, 0.99)) == a);
      CHECK(argmax(blend(adv, exp_scores, 0.01)) == e);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("blend rejects bad inputs") {
  const ActionScores ok{0, 0, 0, 0, 0};
  ActionScores bad = ok;
  bad[2] = std::nan("");
  CHECK_THROWS_AS(blend(bad, ok, 0.5), NumericError);
  bad[2] = INFINITY;
  CHECK_THROWS_AS(blend(ok, bad, 0.5), NumericError);
  CHECK_THROWS_AS(blend(ok, ok, 1.5), ContractError);
  CHECK_THROWS_AS(blend(ok, ok, -0.1), ContractError);
}

TEST_CASE("alpha schedule follows the step formula") {
  const AlphaSchedule s;
  CHECK(alpha_at(s, 0) == 0.6);
  CHECK(alpha_at(s, 1999) == 0.6);
  CHECK(alpha_at(s, 2000) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(alpha_at(s, 4000) == doctest::Approx(0.2).epsilon(1e-12));
  double prev = 1.0;
  for (std::int64_t ep = 0; ep <= 20000; ++ep) {
    const double a = alpha_at(s, ep);
    const double closed = std::max(0.0, 0.6 - 0.2 * static_cast<double>(ep / 2000));
    CHECK(a == closed);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(a <= prev);
    if (ep >= 6000) CHECK(a == 0.0);
    prev = a;
  }
  CHECK_THROWS_AS(alpha_at(s, -1), ContractError);
}

TEST_CASE("alpha schedule validation and floor") {
  AlphaSchedule s;
  s.floor = 0.1;
  CHECK(alpha_at(s, 100000) == 0.1);
  s.decay_interval = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = AlphaSchedule{};
  s.alpha0 = 1.2;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(AlphaSchedule{}.validate());
}

TEST_CASE("action selection") {
  Rng rng(5);
  const Probabilities one_hot{1, 0, 0, 0, 0};
  CHECK(select_action(one_hot, SelectMode::Greedy, rng) == Action::Up);
  for (int i = 0; i < 50; ++i) CHECK(select_action(one_hot, SelectMode::Sample, rng) == Action::Up);

  CHECK(select_action({0.4, 0.1, 0.4, 0.05, 0.05}, SelectMode::Greedy, rng) == Action::Up);
  CHECK(select_action({0.1, 0.1, 0.1, 0.1, 0.6}, SelectMode::Greedy, rng) == Action::NoOp);

  const Probabilities p{0.1, 0.2, 0.3, 0.25, 0.15};
  Rng r1(99), r2(99);
  std::vector<Action> a1, a2;
  for (int i = 0; i < 100; ++i) {
    a1.push_back(select_action(p, SelectMode::Sample, r1));
    a2.push_back(select_action(p, SelectMode::Sample, r2));
  }
  CHECK(a1 == a2);

  Rng r3(3);
  std::array<int, 5> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[env::index_of(select_action(p, SelectMode::Sample, r3))];
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(counts[i] / static_cast<double>(n) - p[i]) < 0.01);
  }

  CHECK_THROWS_AS(select_action({0.5, 0.5, 0.5, 0, 0}, SelectMode::Greedy, rng), ContractError);
  CHECK_THROWS_AS(select_action({-0.1, 1.1, 0, 0, 0}, SelectMode::Sample, rng), ContractError);
}
