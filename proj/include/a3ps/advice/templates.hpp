#pragma once

#include <functional>
#include <string>
#include <vector>

#include "a3ps/env/frogger.hpp"
#include "a3ps/env/oracle.hpp"

namespace a3ps::advice {

struct AdviceContext {
  const env::EnvConfig* config = nullptr;
  const env::GridState* state = nullptr;
  env::Action action = env::Action::NoOp;  // planner's choice for the state
};

// Side ("left"/"right") of the nearest car on the agent's row that is moving
// toward the agent and at most two cells away; empty when none.
std::string approaching_side(const env::EnvConfig& cfg, const env::GridState& s);

// True when row `row` holds a car within two cells of column col.
bool car_near(const env::EnvConfig& cfg, const env::GridState& s, int row, int col);

// A rule fires when its action equals the planner action and its predicate
// holds. `{side}` in the template expands to approaching_side().
struct TemplateRule {
  std::string name;
  env::Action action;
  std::function<bool(const AdviceContext&)> predicate;
  std::string text;
};

std::string render(const TemplateRule& rule, const AdviceContext& ctx);

// Priority-ordered default table; the last rule for each action has no
// predicate beyond the action match.
const std::vector<TemplateRule>& default_rules();

struct GeneratedAdvice {
  std::string rule;
  std::string text;
  env::Action action;
};

// First matching rule for the oracle's greedy action. Throws CoverageError
// when nothing fires and ContractError when the oracle has no entry.
GeneratedAdvice generate_advice(const env::GridState& state, const std::vector<TemplateRule>& rules,
                                const env::OraclePolicy& oracle);

}  // namespace a3ps::advice
