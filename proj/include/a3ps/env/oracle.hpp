#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "a3ps/env/frogger.hpp"

namespace a3ps::env {

struct OracleOptions {
  double gamma = 0.99;
  double tolerance = 1e-9;
  // Sweep cap (planning horizon); solving stops early once converged.
  int max_sweeps = 20000;
  std::size_t state_cap = 1'000'000;
};

struct OracleEntry {
  Action action = Action::NoOp;
  double value = 0.0;
};

// Exhaustive value-iteration solution of the deterministic traffic MDP.
// States are keyed by (highest visited row, agent cell, traffic phase); the
// episode step cap is not part of the key, so values are for the stationary
// discounted problem.
class OraclePolicy {
 public:
  std::size_t size() const { return entries_.size(); }
  int sweeps() const { return sweeps_; }
  double residual() const { return residual_; }
  double gamma() const { return gamma_; }
  const EnvConfig& config() const { return cfg_; }

  // nullopt for terminal states or states outside the keyed space.
  std::optional<std::size_t> key(const GridState& s) const;
  const OracleEntry& at(std::size_t key) const { return entries_.at(key); }
  bool valid(std::size_t key) const { return valid_.at(key) != 0; }
  // Throws ContractError when the state has no key.
  const OracleEntry& lookup(const GridState& s) const;
  GridState state_for_key(std::size_t key) const;

 private:
  friend OraclePolicy solve_oracle(const EnvConfig&, const RewardConfig&, const OracleOptions&);

  EnvConfig cfg_;
  int cycle_ = 1;
  double gamma_ = 0.99;
  int sweeps_ = 0;
  double residual_ = 0.0;
  std::vector<OracleEntry> entries_;
  std::vector<std::uint8_t> valid_;
};

OraclePolicy solve_oracle(const EnvConfig& cfg, const RewardConfig& reward_cfg,
                          const OracleOptions& options = {});

// Every non-terminal state reachable from any reset phase, as oracle keys in
// ascending order.
std::vector<std::size_t> reachable_keys(const OraclePolicy& oracle);

}  // namespace a3ps::env
