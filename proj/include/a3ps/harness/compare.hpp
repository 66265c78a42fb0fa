#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a3ps/harness/logs.hpp"

namespace a3ps::harness {

using RunSet = std::map<std::uint64_t, std::vector<EpisodeLog>>;

// Every seed_<S>.csv under dir, keyed by S.
RunSet read_run_dir(const std::filesystem::path& dir);

struct RunSummary {
  std::optional<std::int64_t> first_goal;
  double early_mean = 0.0;  // mean smoothed reward over the first third
  double final_mean = 0.0;  // mean smoothed reward over the final window
  double final_goal_rate = 0.0;
};

RunSummary summarize(const std::vector<EpisodeLog>& logs, int smoothing_window, int final_window);

struct SeedComparison {
  std::uint64_t seed = 0;
  RunSummary a3ps;
  RunSummary eda;
  bool earlier_goal = false;  // a3ps reached the goal first (strictly)
  bool higher_early = false;  // a3ps early mean strictly above eda's
};

struct CompareThresholds {
  double eda_final_rate_max = 0.05;
  double a3ps_final_rate_min = 0.5;
};

struct ComparisonReport {
  int smoothing_window = 100;
  int final_window = 500;
  CompareThresholds thresholds;
  std::vector<SeedComparison> seeds;
  int earlier_goal_wins = 0;
  int higher_early_wins = 0;
  int eda_low_final = 0;
  int a3ps_high_final = 0;

  // At least two thirds of the seeds satisfy the condition.
  bool majority(int count) const { return 3 * count >= 2 * static_cast<int>(seeds.size()); }
  bool early_learning_verdict() const { return majority(earlier_goal_wins) && majority(higher_early_wins); }
  bool final_rate_verdict() const { return majority(eda_low_final) && majority(a3ps_high_final); }
};

// Seeds and per-seed episode counts must match; ContractError otherwise.
ComparisonReport compare_runs(const RunSet& a3ps, const RunSet& eda, int smoothing_window = 100,
                              int final_window = 500, CompareThresholds thresholds = {});

std::string format_report(const ComparisonReport& report);

}  // namespace a3ps::harness
