#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace a3ps::harness {

struct EpisodeLog {
  std::int64_t episode = 0;
  double reward = 0.0;
  int steps = 0;
  bool reached_goal = false;
  double alpha = 0.0;
  double wall_ms = 0.0;  // not written to CSV

  bool same_outcome(const EpisodeLog& o) const {
    return episode == o.episode && reward == o.reward && steps == o.steps && reached_goal == o.reached_goal &&
           alpha == o.alpha;
  }
};

inline constexpr const char* kCsvHeader = "episode,reward,steps,reached_goal,alpha,smoothed_reward";

// Mean of series[max(0, i - window + 1) .. i].
double trailing_mean(const std::vector<double>& series, std::size_t i, int window);
std::vector<double> smooth_curve(const std::vector<double>& series, int window);

// Shortest text that parses back to the same double.
std::string format_number(double v);

std::vector<double> rewards_of(const std::vector<EpisodeLog>& logs);

// One CSV data row (no newline); smoothed is the trailing mean at this row.
std::string csv_row(const EpisodeLog& log, double smoothed);
std::string format_csv(const std::vector<EpisodeLog>& logs, int window);
void emit_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& logs, int window);
std::vector<EpisodeLog> read_csv(const std::filesystem::path& path);

struct NamedSeries {
  std::string name;
  std::vector<double> values;
};

// Column-aligned table "episode,<name>..."; shorter series leave empty cells.
std::string format_plotdata(const std::vector<NamedSeries>& runs);
void emit_plotdata(const std::filesystem::path& path, const std::vector<NamedSeries>& runs);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace a3ps::harness
