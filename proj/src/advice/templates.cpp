#include "a3ps/advice/templates.hpp"

#include <cstdlib>

#include "a3ps/errors.hpp"

namespace a3ps::advice {

namespace {

int wrap(int x, int n) { return ((x % n) + n) % n; }

bool tunnel_above(const AdviceContext& c) {
  return c.config->is_tunnel(c.state->agent.row + 1, c.state->agent.col);
}

bool hazard(const AdviceContext& c) { return !approaching_side(*c.config, *c.state).empty(); }

bool next_is_goal(const AdviceContext& c) { return c.state->agent.row + 1 == c.config->goal_row(); }

bool above_clear(const AdviceContext& c) {
  return !car_near(*c.config, *c.state, c.state->agent.row + 1, c.state->agent.col);
}

bool always(const AdviceContext&) { return true; }

}  // namespace

std::string approaching_side(const env::EnvConfig& cfg, const env::GridState& s) {
  int best = cfg.cols;
  std::string side;
  for (const env::Car& car : s.cars) {
    if (car.row != s.agent.row) continue;
    int d = 0;
    const char* from = nullptr;
    if (car.direction == env::CarDirection::Rightward) {
      d = wrap(s.agent.col - car.col, cfg.cols);
      from = "left";
    } else if (car.direction == env::CarDirection::Leftward) {
      d = wrap(car.col - s.agent.col, cfg.cols);
      from = "right";
    } else {
      continue;
    }
    if (d >= 1 && d <= 2 && d < best) {
      best = d;
      side = from;
    }
  }
  return side;
}

bool car_near(const env::EnvConfig& cfg, const env::GridState& s, int row, int col) {
  for (const env::Car& car : s.cars) {
    if (car.row != row) continue;
    const int d = wrap(car.col - col, cfg.cols);
    if (std::min(d, cfg.cols - d) <= 2) return true;
  }
  return false;
}

std::string render(const TemplateRule& rule, const AdviceContext& ctx) {
  std::string out = rule.text;
  const std::string slot = "{side}";
  for (auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot)) {
    out.replace(pos, slot.size(), approaching_side(*ctx.config, *ctx.state));
  }
  return out;
}

const std::vector<TemplateRule>& default_rules() {
  using env::Action;
  // Priority: goal in reach, hazard on the agent's row, tunnel detours,
  // traffic above, then one catch-all per action.
  static const std::vector<TemplateRule> rules = {
      {"goal_ahead", Action::Up, next_is_goal, "move forward reach goal"},
      {"escape_up", Action::Up, hazard, "car coming from {side} move forward escape"},
      {"escape_down", Action::Down, hazard, "car coming from {side} move back down avoid car"},
      {"dodge_left", Action::Left, hazard, "car coming from {side} move left avoid car"},
      {"dodge_right", Action::Right, hazard, "car coming from {side} move right avoid car"},
      {"hold_hazard", Action::NoOp, hazard, "car coming from {side} wait stay put"},
      {"tunnel_left", Action::Left, tunnel_above, "moved left get better position next move forward get around tunnel"},
      {"tunnel_right", Action::Right, tunnel_above,
       "moved right get better position next move forward get around tunnel"},
      {"clear_up", Action::Up, above_clear, "move forward path is clear"},
      {"gap_up", Action::Up, always, "move forward through gap in traffic"},
      {"wait_traffic", Action::NoOp, [](const AdviceContext& c) { return !above_clear(c); },
       "wait car passing above then move forward"},
      {"wait", Action::NoOp, always, "wait stay put let traffic pass"},
      {"back_down", Action::Down, always, "move back down wait for better gap"},
      {"left", Action::Left, always, "move left find safer gap"},
      {"right", Action::Right, always, "move right find safer gap"},
  };
  return rules;
}

GeneratedAdvice generate_advice(const env::GridState& state, const std::vector<TemplateRule>& rules,
                                const env::OraclePolicy& oracle) {
  const env::Action action = oracle.lookup(state).action;
  const AdviceContext ctx{&oracle.config(), &state, action};
  for (const TemplateRule& rule : rules) {
    if (rule.action == action && rule.predicate(ctx)) return {rule.name, render(rule, ctx), action};
  }
  throw CoverageError("no advice rule covers agent (" + std::to_string(state.agent.row) + ", " +
                      std::to_string(state.agent.col) + ") tick " + std::to_string(state.tick) + " action " +
                      std::string(env::action_name(action)));
}

}  // namespace a3ps::advice
