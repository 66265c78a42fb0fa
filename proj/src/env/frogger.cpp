#include "a3ps/env/frogger.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "a3ps/errors.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::env {

namespace {

int wrap(int x, int n) {
  const int m = x % n;
  return m < 0 ? m + n : m;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool car_moves_on(const Lane& lane, std::int64_t tick) {
  // Transition tick -> tick + 1 advances the lane when the scaled clock
  // crosses a period boundary.
  return floor_div(tick + 1 + lane.phase, lane.period) != floor_div(tick + lane.phase, lane.period);
}

}  // namespace

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::NoOp: return "noop";
  }
  return "?";
}

Action action_from_name(std::string_view name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  throw ContractError("unknown action '" + std::string(name) + "'");
}

Action action_at(int index) {
  if (index < 0 || index >= kNumActions) {
    throw ContractError("action index out of range: " + std::to_string(index));
  }
  return static_cast<Action>(index);
}

std::string_view reward_mode_name(RewardMode m) { return m == RewardMode::Dense ? "dense" : "sparse"; }

RewardMode reward_mode_from_name(std::string_view name) {
  if (name == "dense") return RewardMode::Dense;
  if (name == "sparse") return RewardMode::Sparse;
  throw ConfigError("unknown reward mode '" + std::string(name) + "'");
}

EnvConfig EnvConfig::standard() {
  EnvConfig c;
  using D = CarDirection;
  c.lanes.resize(c.rows);
  c.lanes[1] = {D::Rightward, 2, 0, {0, 5}};
  c.lanes[2] = {D::Leftward, 3, 1, {2, 6}};
  c.lanes[3] = {D::Rightward, 2, 1, {1}};
  c.lanes[4] = {D::Leftward, 2, 0, {0, 4}};
  c.lanes[5] = {D::Rightward, 3, 2, {3, 7}};
  c.lanes[6] = {D::Leftward, 2, 0, {5}};
  c.lanes[7] = {D::Rightward, 1, 0, {2}};
  return c;
}

EnvConfig EnvConfig::no_traffic() {
  EnvConfig c = standard();
  c.lanes.clear();
  return c;
}

bool EnvConfig::is_tunnel(int row, int col) const {
  return row == tunnel_row && std::find(tunnel_cols.begin(), tunnel_cols.end(), col) != tunnel_cols.end();
}

const Lane* EnvConfig::lane(int row) const {
  if (row < 0 || row >= static_cast<int>(lanes.size())) return nullptr;
  const Lane& l = lanes[row];
  if (l.direction == CarDirection::None || l.offsets.empty()) return nullptr;
  return &l;
}

int EnvConfig::traffic_cycle() const {
  long long cycle = 1;
  for (int r = 0; r < height(); ++r) {
    if (const Lane* l = lane(r)) cycle = std::lcm(cycle, static_cast<long long>(l->period) * cols);
  }
  return static_cast<int>(cycle);
}

void EnvConfig::validate() const {
  if (rows < 2) throw ConfigError("rows must be >= 2");
  if (rows > 30) throw ConfigError("rows must be <= 30 (visited-row bitset width)");
  if (cols < 3) throw ConfigError("cols must be >= 3");
  if (tunnel_row <= 0 || tunnel_row >= rows) {
    throw ConfigError("tunnel_row must lie strictly inside the traversal band (0, rows)");
  }
  if (tunnel_cols.empty()) throw ConfigError("tunnel_cols must be nonempty");
  std::set<int> distinct(tunnel_cols.begin(), tunnel_cols.end());
  if (distinct.size() != tunnel_cols.size()) throw ConfigError("tunnel_cols contains duplicates");
  for (int c : tunnel_cols) {
    if (c < 0 || c >= cols) throw ConfigError("tunnel_cols entry outside the grid");
  }
  if (static_cast<int>(distinct.size()) >= cols) {
    throw ConfigError("tunnel_cols must be a strict subset of the columns");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (static_cast<int>(lanes.size()) > height()) throw ConfigError("more lanes than grid rows");
  for (int r = 0; r < static_cast<int>(lanes.size()); ++r) {
    const Lane& l = lanes[r];
    if (l.period < 1) throw ConfigError("lane " + std::to_string(r) + ": period must be >= 1");
    if (l.direction == CarDirection::None || l.offsets.empty()) continue;
    if (r == 0 || r == goal_row()) {
      throw ConfigError("lane " + std::to_string(r) + ": start and goal rows carry no traffic");
    }
    std::set<int> offs;
    for (int o : l.offsets) {
      if (o < 0 || o >= cols) throw ConfigError("lane " + std::to_string(r) + ": offset outside the grid");
      if (!offs.insert(o).second) throw ConfigError("lane " + std::to_string(r) + ": duplicate offset");
    }
  }
  if (static_cast<long long>(traffic_cycle()) > 1'000'000) throw ConfigError("traffic cycle too long");
}

double event_reward(const Event& e, const RewardConfig& cfg) {
  const bool sparse = cfg.mode == RewardMode::Sparse;
  switch (e.kind) {
    case EventKind::ReachedGoal: return cfg.goal;
    case EventKind::Collision: return cfg.collision;
    case EventKind::Timeout: return 0.0;
    default: break;
  }
  if (sparse) return 0.0;
  switch (e.kind) {
    case EventKind::ReachedRowFirstTime: {
      auto it = cfg.row_first_visit.find(e.row);
      return it == cfg.row_first_visit.end() ? 0.0 : it->second;
    }
    case EventKind::PassedTunnel: return cfg.tunnel_pass;
    case EventKind::LevelUp: return cfg.level_up;
    case EventKind::Waited: return e.row == 0 ? cfg.wait_start : cfg.wait_other;
    case EventKind::BlockedBySide:
    case EventKind::BlockedByTunnel: return cfg.blocked;
    default: return 0.0;
  }
}

bool StepOutcome::has(EventKind k) const {
  return std::any_of(events.begin(), events.end(), [k](const Event& e) { return e.kind == k; });
}

std::vector<Car> cars_at(const EnvConfig& cfg, std::int64_t tick) {
  std::vector<Car> cars;
  for (int r = 0; r < cfg.height(); ++r) {
    const Lane* l = cfg.lane(r);
    if (!l) continue;
    const std::int64_t moved = floor_div(tick + l->phase, l->period);
    const int dir = static_cast<int>(l->direction);
    for (int o : l->offsets) {
      const int col = wrap(static_cast<int>((o + dir * (moved % cfg.cols)) % cfg.cols), cfg.cols);
      cars.push_back({r, col, l->direction});
    }
  }
  return cars;
}

int feature_frame_size(const EnvConfig& cfg) { return cfg.height() * cfg.cols * kNumChannels; }

int frame_size(const EnvConfig& cfg, ObservationMode mode) {
  return mode == ObservationMode::Features ? feature_frame_size(cfg) : kPixelSide * kPixelSide * 3;
}

std::vector<double> feature_frame(const EnvConfig& cfg, const GridState& s) {
  std::vector<double> f(static_cast<std::size_t>(feature_frame_size(cfg)), 0.0);
  auto at = [&](int row, int col, int ch) -> double& {
    return f[(static_cast<std::size_t>(row) * cfg.cols + col) * kNumChannels + ch];
  };
  for (int c : cfg.tunnel_cols) at(cfg.tunnel_row, c, kTunnel) = 1.0;
  for (int c = 0; c < cfg.cols; ++c) at(cfg.goal_row(), c, kGoalRow) = 1.0;
  for (const Car& car : s.cars) {
    at(car.row, car.col, car.direction == CarDirection::Leftward ? kCarLeft : kCarRight) = 1.0;
  }
  at(s.agent.row, s.agent.col, kAgent) = 1.0;
  return f;
}

std::pair<GridState, Observation> reset(const EnvConfig& cfg, const RewardConfig& /*reward_cfg*/,
                                        std::uint64_t seed, ObservationMode mode) {
  cfg.validate();
  GridState s;
  s.agent = {0, cfg.cols / 2};
  s.visited_rows = 1u;
  s.steps = 0;
  s.terminal = TerminalCause::None;
  s.tick = cfg.phase_from_seed ? static_cast<std::int64_t>(mix_seed(seed, 0) % cfg.traffic_cycle()) : 0;
  if (cfg.randomized_traffic) {
    Rng rng(mix_seed(seed, 1));
    for (int r = 0; r < cfg.height(); ++r) {
      const Lane* l = cfg.lane(r);
      if (!l) continue;
      std::vector<int> cols(cfg.cols);
      std::iota(cols.begin(), cols.end(), 0);
      rng.shuffle(cols.begin(), cols.end());
      for (std::size_t i = 0; i < l->offsets.size(); ++i) s.cars.push_back({r, cols[i], l->direction});
    }
  } else {
    s.cars = cars_at(cfg, s.tick);
  }
  Observation obs = observe(cfg, s, {}, mode);
  return {std::move(s), std::move(obs)};
}

StepOutcome step(const EnvConfig& cfg, const GridState& s, Action a, const RewardConfig& reward_cfg) {
  if (s.is_terminal()) throw ContractError("step called on a terminal state");

  StepOutcome out;
  GridState next = s;
  std::vector<Event>& ev = out.events;
  const Cell from = s.agent;
  Cell to = from;

  switch (a) {
    case Action::Up: to.row += 1; break;
    case Action::Down: to.row -= 1; break;
    case Action::Left: to.col -= 1; break;
    case Action::Right: to.col += 1; break;
    case Action::NoOp: break;
  }

  if (a == Action::NoOp) {
    ev.push_back({EventKind::Waited, from.row});
  } else if (to.row < 0 || to.col < 0 || to.col >= cfg.cols) {
    ev.push_back({EventKind::BlockedBySide, from.row});
    to = from;
  } else if (cfg.is_tunnel(to.row, to.col)) {
    ev.push_back({EventKind::BlockedByTunnel, from.row});
    to = from;
  } else if (to.row == cfg.goal_row()) {
    ev.push_back({EventKind::ReachedGoal, to.row});
    ev.push_back({EventKind::LevelUp, to.row});
  } else if (a == Action::Up) {
    ev.push_back({EventKind::LevelUp, to.row});
    if (!s.visited(to.row)) {
      ev.push_back({EventKind::ReachedRowFirstTime, to.row});
      if (to.row == cfg.tunnel_row) ev.push_back({EventKind::PassedTunnel, to.row});
    }
  }
  next.agent = to;
  if (to.row < cfg.goal_row()) next.visited_rows |= (1u << to.row);

  // Traffic advances after the agent; both moves resolve before collision.
  bool collided = false;
  for (Car& car : next.cars) {
    const Lane* l = cfg.lane(car.row);
    const Cell before{car.row, car.col};
    if (l && car_moves_on(*l, s.tick)) car.col = wrap(car.col + static_cast<int>(car.direction), cfg.cols);
    const Cell after{car.row, car.col};
    if (after == to) collided = true;
    // Swap: agent and car exchanged cells within the tick.
    if (before == to && after == from && !(from == to)) collided = true;
  }
  next.tick = s.tick + 1;
  next.steps = s.steps + 1;

  if (collided) {
    ev.clear();
    ev.push_back({EventKind::Collision, to.row});
    next.terminal = TerminalCause::Collision;
  } else if (out.has(EventKind::ReachedGoal)) {
    next.terminal = TerminalCause::Goal;
  } else if (next.steps >= cfg.max_steps) {
    ev.push_back({EventKind::Timeout, to.row});
    next.terminal = TerminalCause::Timeout;
  }

  double reward = 0.0;
  for (const Event& e : ev) reward += event_reward(e, reward_cfg);
  out.reward = reward;
  out.terminal = next.is_terminal();
  out.next_state = std::move(next);
  return out;
}

Observation observe(const EnvConfig& cfg, const GridState& s, const std::vector<GridState>& history,
                    ObservationMode mode) {
  if (history.size() > kFrameStack - 1) throw ContractError("observe: history longer than 3 states");
  Observation obs;
  obs.pixel = mode == ObservationMode::Pixels;
  obs.frame_size = frame_size(cfg, mode);
  obs.frames.reserve(static_cast<std::size_t>(obs.frame_size) * kFrameStack);

  std::vector<const GridState*> seq;
  for (const GridState& h : history) seq.push_back(&h);
  seq.push_back(&s);
  while (seq.size() < kFrameStack) seq.insert(seq.begin(), seq.front());

  for (const GridState* st : seq) {
    const auto f = obs.pixel ? pixel_frame(cfg, *st) : feature_frame(cfg, *st);
    obs.frames.insert(obs.frames.end(), f.begin(), f.end());
  }
  obs.goal_vector.assign(static_cast<std::size_t>(cfg.rows), 0.0);
  for (int r = 0; r < cfg.rows; ++r) obs.goal_vector[r] = s.visited(r) ? 1.0 : 0.0;
  return obs;
}

FroggerEnv::FroggerEnv(EnvConfig cfg, RewardConfig reward_cfg, ObservationMode mode)
    : cfg_(std::move(cfg)), reward_cfg_(std::move(reward_cfg)), mode_(mode) {
  cfg_.validate();
}

const Observation& FroggerEnv::reset(std::uint64_t seed) {
  auto [s, o] = env::reset(cfg_, reward_cfg_, seed, mode_);
  state_ = std::move(s);
  obs_ = std::move(o);
  history_.clear();
  started_ = true;
  return obs_;
}

StepOutcome FroggerEnv::step(Action a) {
  StepOutcome out = env::step(cfg_, state_, a, reward_cfg_);
  history_.push_back(state_);
  while (history_.size() > kFrameStack - 1) history_.pop_front();
  state_ = out.next_state;
  obs_ = observe(cfg_, state_, std::vector<GridState>(history_.begin(), history_.end()), mode_);
  return out;
}

}  // namespace a3ps::env
