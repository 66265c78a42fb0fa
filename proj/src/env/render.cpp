#include <array>

#include "a3ps/env/frogger.hpp"

namespace a3ps::env {

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kBackground = {0.05, 0.05, 0.05};
constexpr Rgb kRoad = {0.25, 0.25, 0.25};
constexpr Rgb kGoal = {0.10, 0.60, 0.15};
constexpr Rgb kTunnelColor = {0.55, 0.40, 0.20};
constexpr Rgb kCarLeftColor = {0.90, 0.15, 0.10};
constexpr Rgb kCarRightColor = {0.95, 0.80, 0.10};
constexpr Rgb kAgentColor = {0.20, 0.95, 0.30};

}  // namespace

// Screen row 0 is the top of the image, which shows the goal row.
std::vector<double> pixel_frame(const EnvConfig& cfg, const GridState& s) {
  const int h = cfg.height();
  std::vector<Rgb> cell(static_cast<std::size_t>(h) * cfg.cols, kBackground);
  auto at = [&](int row, int col) -> Rgb& { return cell[static_cast<std::size_t>(row) * cfg.cols + col]; };
  for (int r = 1; r < cfg.goal_row(); ++r) {
    for (int c = 0; c < cfg.cols; ++c) at(r, c) = kRoad;
  }
  for (int c = 0; c < cfg.cols; ++c) at(cfg.goal_row(), c) = kGoal;
  for (int c : cfg.tunnel_cols) at(cfg.tunnel_row, c) = kTunnelColor;
  for (const Car& car : s.cars) {
    at(car.row, car.col) = car.direction == CarDirection::Leftward ? kCarLeftColor : kCarRightColor;
  }
  at(s.agent.row, s.agent.col) = kAgentColor;

  std::vector<double> img(static_cast<std::size_t>(kPixelSide) * kPixelSide * 3);
  for (int y = 0; y < kPixelSide; ++y) {
    const int row = h - 1 - (y * h) / kPixelSide;
    for (int x = 0; x < kPixelSide; ++x) {
      const int col = (x * cfg.cols) / kPixelSide;
      const Rgb& c = at(row, col);
      double* px = img.data() + (static_cast<std::size_t>(y) * kPixelSide + x) * 3;
      px[0] = c[0];
      px[1] = c[1];
      px[2] = c[2];
    }
  }
  return img;
}

}  // namespace a3ps::env
