#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace a3ps::env {

// Index order is part of the observation/action contract.
enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, NoOp = 4 };
inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Up, Action::Down, Action::Left, Action::Right, Action::NoOp};

std::string_view action_name(Action a);
Action action_from_name(std::string_view name);
inline int index_of(Action a) { return static_cast<int>(a); }
Action action_at(int index);

enum class CarDirection : int { None = 0, Leftward = -1, Rightward = 1 };

// One traffic lane. Car i sits at column
//   (offsets[i] + dir * floor((tick + phase) / period)) mod cols.
struct Lane {
  CarDirection direction = CarDirection::None;
  int period = 1;
  int phase = 0;
  std::vector<int> offsets;
};

// Rows are numbered from the bottom: row 0 is the start row, rows 1..rows-1
// carry traffic, and row `rows` is the goal row. The grid therefore has
// rows + 1 lines of cells.
struct EnvConfig {
  int rows = 8;
  int cols = 9;
  int tunnel_row = 4;
  std::vector<int> tunnel_cols = {3, 4, 5};
  // lanes[r] describes traffic on row r; missing or None lanes are empty.
  std::vector<Lane> lanes;
  int max_steps = 50;
  std::uint64_t seed = 0;
  // When set, reset() draws the initial traffic clock from the seed.
  bool phase_from_seed = true;
  // Randomized lane offsets at reset; never used for acceptance runs.
  bool randomized_traffic = false;

  static EnvConfig standard();
  // Same geometry with every lane empty.
  static EnvConfig no_traffic();

  int height() const { return rows + 1; }
  int goal_row() const { return rows; }
  bool is_tunnel(int row, int col) const;
  const Lane* lane(int row) const;

  // Ticks after which every lane returns to its initial layout.
  int traffic_cycle() const;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
};

enum class RewardMode { Dense, Sparse };

struct RewardConfig {
  double goal = 400.0;
  std::map<int, double> row_first_visit = {{1, 10.0}};
  double tunnel_pass = 100.0;
  double level_up = 1.0;
  double wait_start = -5.0;
  double wait_other = -1.0;
  double blocked = -2.0;
  double collision = -20.0;
  RewardMode mode = RewardMode::Dense;

  static RewardConfig dense() { return {}; }
  static RewardConfig sparse() {
    RewardConfig r;
    r.mode = RewardMode::Sparse;
    return r;
  }
};

std::string_view reward_mode_name(RewardMode m);
RewardMode reward_mode_from_name(std::string_view name);

enum class EventKind {
  ReachedRowFirstTime,
  PassedTunnel,
  ReachedGoal,
  Collision,
  BlockedBySide,
  BlockedByTunnel,
  Waited,
  LevelUp,
  Timeout,
};

struct Event {
  EventKind kind;
  int row = -1;  // row the event refers to (visited row, waiting row)
  bool operator==(const Event&) const = default;
};

// Per-event reward under the given config; sparse mode keeps only goal and
// collision.
double event_reward(const Event& e, const RewardConfig& cfg);

enum class TerminalCause { None, Goal, Collision, Timeout };

struct Car {
  int row;
  int col;
  CarDirection direction;
  bool operator==(const Car&) const = default;
};

struct Cell {
  int row;
  int col;
  bool operator==(const Cell&) const = default;
};

struct GridState {
  Cell agent{0, 0};
  std::vector<Car> cars;
  std::uint32_t visited_rows = 1;  // bit r set once row r was reached
  std::int64_t tick = 0;           // traffic clock
  int steps = 0;                   // transitions taken this episode
  TerminalCause terminal = TerminalCause::None;

  bool is_terminal() const { return terminal != TerminalCause::None; }
  bool visited(int row) const { return (visited_rows >> row) & 1u; }
  bool operator==(const GridState&) const = default;
};

struct StepOutcome {
  GridState next_state;
  double reward = 0.0;
  bool terminal = false;
  std::vector<Event> events;

  bool has(EventKind k) const;
};

// Feature-grid channels, in storage order.
enum Channel : int { kAgent = 0, kCarLeft, kCarRight, kTunnel, kGoalRow, kNumChannels };

inline constexpr int kFrameStack = 4;

struct Observation {
  // kFrameStack frames, oldest first, each frame_size values.
  std::vector<double> frames;
  std::vector<double> goal_vector;
  int frame_size = 0;
  bool pixel = false;

  const double* frame(int k) const { return frames.data() + static_cast<std::size_t>(k) * frame_size; }
  bool operator==(const Observation&) const = default;
};

enum class ObservationMode { Features, Pixels };

inline constexpr int kPixelSide = 100;

int feature_frame_size(const EnvConfig& cfg);
int frame_size(const EnvConfig& cfg, ObservationMode mode);

// Car list for the given traffic clock.
std::vector<Car> cars_at(const EnvConfig& cfg, std::int64_t tick);

// Single-frame feature grid (height x cols x channels, row-major).
std::vector<double> feature_frame(const EnvConfig& cfg, const GridState& s);

// Deterministic flat-color rendering, kPixelSide^2 x 3 values in [0, 1].
std::vector<double> pixel_frame(const EnvConfig& cfg, const GridState& s);

std::pair<GridState, Observation> reset(const EnvConfig& cfg, const RewardConfig& reward_cfg,
                                        std::uint64_t seed,
                                        ObservationMode mode = ObservationMode::Features);

StepOutcome step(const EnvConfig& cfg, const GridState& s, Action a, const RewardConfig& reward_cfg);

// history holds up to kFrameStack - 1 earlier states, oldest first.
Observation observe(const EnvConfig& cfg, const GridState& s, const std::vector<GridState>& history,
                    ObservationMode mode = ObservationMode::Features);

// Stateful episode runner around the pure transition functions.
class FroggerEnv {
 public:
  FroggerEnv(EnvConfig cfg, RewardConfig reward_cfg,
             ObservationMode mode = ObservationMode::Features);

  const Observation& reset(std::uint64_t seed);
  StepOutcome step(Action a);

  const GridState& state() const { return state_; }
  // True before the first reset and after a terminal transition.
  bool needs_reset() const { return !started_ || state_.is_terminal(); }
  const Observation& observation() const { return obs_; }
  const EnvConfig& config() const { return cfg_; }
  const RewardConfig& reward_config() const { return reward_cfg_; }
  ObservationMode mode() const { return mode_; }
  int observation_frame_size() const { return frame_size(cfg_, mode_); }

 private:
  EnvConfig cfg_;
  RewardConfig reward_cfg_;
  ObservationMode mode_;
  bool started_ = false;
  GridState state_;
  std::deque<GridState> history_;
  Observation obs_;
};

}  // namespace a3ps::env
