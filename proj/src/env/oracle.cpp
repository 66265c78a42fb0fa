#include "a3ps/env/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "a3ps/errors.hpp"

namespace a3ps::env {

namespace {

struct Transition {
  std::int64_t next = -1;  // -1 when the transition terminates
  double reward = 0.0;
};

int highest_visited(std::uint32_t mask) {
  int m = 0;
  while (mask >> (m + 1)) ++m;
  return m;
}

}  // namespace

std::optional<std::size_t> OraclePolicy::key(const GridState& s) const {
  if (s.is_terminal()) return std::nullopt;
  const int m = highest_visited(s.visited_rows);
  // Visited rows always form a prefix {0..m} because the agent moves one
  // row at a time.
  if (s.visited_rows != ((m >= 31) ? ~0u : ((1u << (m + 1)) - 1u))) return std::nullopt;
  if (m >= cfg_.rows || s.agent.row > m || s.agent.row < 0) return std::nullopt;
  const auto phase = static_cast<std::size_t>(((s.tick % cycle_) + cycle_) % cycle_);
  const std::size_t k =
      ((static_cast<std::size_t>(m) * cfg_.rows + s.agent.row) * cfg_.cols + s.agent.col) * cycle_ + phase;
  if (k >= entries_.size() || !valid_[k]) return std::nullopt;
  return k;
}

const OracleEntry& OraclePolicy::lookup(const GridState& s) const {
  auto k = key(s);
  if (!k) throw ContractError("oracle has no entry for this state");
  return entries_[*k];
}

GridState OraclePolicy::state_for_key(std::size_t k) const {
  const auto phase = static_cast<int>(k % cycle_);
  k /= cycle_;
  const int col = static_cast<int>(k % cfg_.cols);
  k /= cfg_.cols;
  const int row = static_cast<int>(k % cfg_.rows);
  const int m = static_cast<int>(k / cfg_.rows);
  GridState s;
  s.agent = {row, col};
  s.visited_rows = (1u << (m + 1)) - 1u;
  s.tick = phase;
  s.steps = 0;
  s.cars = cars_at(cfg_, phase);
  return s;
}

OraclePolicy solve_oracle(const EnvConfig& cfg, const RewardConfig& reward_cfg, const OracleOptions& options) {
  cfg.validate();
  if (cfg.randomized_traffic) throw ConfigError("oracle requires deterministic traffic");
  OraclePolicy p;
  p.cfg_ = cfg;
  p.cfg_.max_steps = std::numeric_limits<int>::max();
  p.cycle_ = cfg.traffic_cycle();
  p.gamma_ = options.gamma;

  const std::size_t n = static_cast<std::size_t>(cfg.rows) * cfg.rows * cfg.cols * p.cycle_;
  if (n > options.state_cap) {
    throw CapacityError("oracle state space has " + std::to_string(n) + " keys, cap is " +
                        std::to_string(options.state_cap));
  }
  p.entries_.assign(n, {});
  p.valid_.assign(n, 0);

  // Mark keys that describe a live state: visited prefix covers the agent
  // row, agent off the tunnel and not sharing a cell with a car.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t r = k / p.cycle_;
    const int col = static_cast<int>(r % cfg.cols);
    r /= cfg.cols;
    const int row = static_cast<int>(r % cfg.rows);
    const int m = static_cast<int>(r / cfg.rows);
    if (row > m || cfg.is_tunnel(row, col)) continue;
    p.valid_[k] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!p.valid_[k]) continue;
    const GridState s = p.state_for_key(k);
    for (const Car& c : s.cars) {
      if (c.row == s.agent.row && c.col == s.agent.col) p.valid_[k] = 0;
    }
  }

  std::vector<Transition> table(n * kNumActions);
  for (std::size_t k = 0; k < n; ++k) {
    if (!p.valid_[k]) continue;
    const GridState s = p.state_for_key(k);
    for (int a = 0; a < kNumActions; ++a) {
      StepOutcome o = step(p.cfg_, s, action_at(a), reward_cfg);
      Transition& t = table[k * kNumActions + a];
      t.reward = o.reward;
      if (!o.terminal) {
        auto nk = p.key(o.next_state);
        if (!nk) throw ContractError("oracle transition left the keyed state space");
        t.next = static_cast<std::int64_t>(*nk);
      }
    }
  }

  std::vector<double> v(n, 0.0), v_next(n, 0.0);
  const double g = options.gamma;
  int sweep = 0;
  double delta = std::numeric_limits<double>::infinity();
  while (sweep < options.max_sweeps && delta >= options.tolerance) {
    delta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!p.valid_[k]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        const Transition& t = table[k * kNumActions + a];
        const double q = t.reward + (t.next >= 0 ? g * v[static_cast<std::size_t>(t.next)] : 0.0);
        best = std::max(best, q);
      }
      v_next[k] = best;
      delta = std::max(delta, std::abs(best - v[k]));
    }
    v.swap(v_next);
    ++sweep;
  }
  p.sweeps_ = sweep;
  p.residual_ = delta;

  for (std::size_t k = 0; k < n; ++k) {
    if (!p.valid_[k]) continue;
    int best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumActions; ++a) {
      const Transition& t = table[k * kNumActions + a];
      const double q = t.reward + (t.next >= 0 ? g * v[static_cast<std::size_t>(t.next)] : 0.0);
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    p.entries_[k] = {action_at(best_a), v[k]};
  }
  return p;
}

std::vector<std::size_t> reachable_keys(const OraclePolicy& oracle) {
  const EnvConfig& cfg = oracle.config();
  const int cycle = cfg.traffic_cycle();
  std::vector<std::uint8_t> seen(oracle.size(), 0);
  std::vector<std::size_t> frontier;
  for (int phase = 0; phase < cycle; ++phase) {
    GridState s;
    s.agent = {0, cfg.cols / 2};
    s.visited_rows = 1u;
    s.tick = phase;
    s.cars = cars_at(cfg, phase);
    auto k = oracle.key(s);
    if (k && !seen[*k]) {
      seen[*k] = 1;
      frontier.push_back(*k);
    }
  }
  const RewardConfig rc = RewardConfig::dense();
  while (!frontier.empty()) {
    const std::size_t k = frontier.back();
    frontier.pop_back();
    const GridState s = oracle.state_for_key(k);
    for (Action a : kAllActions) {
      StepOutcome o = step(cfg, s, a, rc);
      if (o.terminal) continue;
      auto nk = oracle.key(o.next_state);
      if (nk && !seen[*nk]) {
        seen[*nk] = 1;
        frontier.push_back(*nk);
      }
    }
  }
  std::vector<std::size_t> keys;
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (seen[k]) keys.push_back(k);
  }
  return keys;
}

}  // namespace a3ps::env
