#include "a3ps/harness/compare.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "a3ps/errors.hpp"

namespace a3ps::harness {

RunSet read_run_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FileError("not a run directory: " + dir.string());
  static const std::regex name(R"(seed_(\d+)\.csv)");
  RunSet runs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (!std::regex_match(file, m, name)) continue;
    runs[std::stoull(m[1].str())] = read_csv(entry.path());
  }
  if (runs.empty()) throw FileError("no seed_<S>.csv files in " + dir.string());
  return runs;
}

namespace {

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string goal_text(const std::optional<std::int64_t>& g) { return g ? std::to_string(*g) : "never"; }

}  // namespace

RunSummary summarize(const std::vector<EpisodeLog>& logs, int smoothing_window, int final_window) {
  if (final_window < 1) throw ContractError("final window must be >= 1");
  RunSummary s;
  const std::vector<double> smooth = smooth_curve(rewards_of(logs), smoothing_window);
  const std::size_t n = logs.size();
  for (const EpisodeLog& l : logs) {
    if (l.reached_goal) {
      s.first_goal = l.episode;
      break;
    }
  }
  s.early_mean = mean_of(smooth, 0, n / 3);
  const std::size_t from = n > static_cast<std::size_t>(final_window) ? n - final_window : 0;
  s.final_mean = mean_of(smooth, from, n);
  const auto goals = std::count_if(logs.begin() + static_cast<std::ptrdiff_t>(from), logs.end(),
                                   [](const EpisodeLog& l) { return l.reached_goal; });
  s.final_goal_rate = n > from ? static_cast<double>(goals) / static_cast<double>(n - from) : 0.0;
  return s;
}

ComparisonReport compare_runs(const RunSet& a3ps, const RunSet& eda, int smoothing_window, int final_window,
                              CompareThresholds thresholds) {
  if (a3ps.size() != eda.size()) throw ContractError("compare_runs: the runs cover different seed sets");
  ComparisonReport r;
  r.smoothing_window = smoothing_window;
  r.final_window = final_window;
  r.thresholds = thresholds;
  for (const auto& [seed, a] : a3ps) {
    const auto it = eda.find(seed);
    if (it == eda.end()) throw ContractError("compare_runs: seed " + std::to_string(seed) + " missing from one run");
    if (it->second.size() != a.size()) {
      throw ContractError("compare_runs: seed " + std::to_string(seed) + " has " + std::to_string(a.size()) +
                          " vs " + std::to_string(it->second.size()) + " episodes");
    }
    SeedComparison c;
    c.seed = seed;
    c.a3ps = summarize(a, smoothing_window, final_window);
    c.eda = summarize(it->second, smoothing_window, final_window);
    c.earlier_goal = c.a3ps.first_goal && (!c.eda.first_goal || *c.a3ps.first_goal < *c.eda.first_goal);
    c.higher_early = c.a3ps.early_mean > c.eda.early_mean;
    r.earlier_goal_wins += c.earlier_goal;
    r.higher_early_wins += c.higher_early;
    r.eda_low_final += c.eda.final_goal_rate <= thresholds.eda_final_rate_max;
    r.a3ps_high_final += c.a3ps.final_goal_rate >= thresholds.a3ps_final_rate_min;
    r.seeds.push_back(c);
  }
  return r;
}

std::string format_report(const ComparisonReport& r) {
  std::string out = "seed,first_goal_a3ps,first_goal_eda,early_mean_a3ps,early_mean_eda,early_delta,"
                    "final_mean_a3ps,final_mean_eda,final_delta,final_rate_a3ps,final_rate_eda,final_rate_delta\n";
  for (const SeedComparison& c : r.seeds) {
    out += std::to_string(c.seed) + ',' + goal_text(c.a3ps.first_goal) + ',' + goal_text(c.eda.first_goal) + ',' +
           fixed(c.a3ps.early_mean) + ',' + fixed(c.eda.early_mean) + ',' +
           fixed(c.a3ps.early_mean - c.eda.early_mean) + ',' + fixed(c.a3ps.final_mean) + ',' +
           fixed(c.eda.final_mean) + ',' + fixed(c.a3ps.final_mean - c.eda.final_mean) + ',' +
           fixed(c.a3ps.final_goal_rate) + ',' + fixed(c.eda.final_goal_rate) + ',' +
           fixed(c.a3ps.final_goal_rate - c.eda.final_goal_rate) + '\n';
  }
  const std::string n = std::to_string(r.seeds.size());
  auto verdict = [](bool ok) { return ok ? "WIN" : "LOSS"; };
  out += "\nsmoothing window " + std::to_string(r.smoothing_window) + ", final window " +
         std::to_string(r.final_window) + '\n';
  out += "a3ps reaches the goal first: " + std::to_string(r.earlier_goal_wins) + '/' + n + '\n';
  out += "a3ps higher early mean: " + std::to_string(r.higher_early_wins) + '/' + n + '\n';
  out += "early learning verdict: " + std::string(verdict(r.early_learning_verdict())) + '\n';
  out += "eda final goal rate <= " + fixed(r.thresholds.eda_final_rate_max, 2) + ": " +
         std::to_string(r.eda_low_final) + '/' + n + '\n';
  out += "a3ps final goal rate >= " + fixed(r.thresholds.a3ps_final_rate_min, 2) + ": " +
         std::to_string(r.a3ps_high_final) + '/' + n + '\n';
  out += "final rate verdict: " + std::string(verdict(r.final_rate_verdict())) + '\n';
  return out;
}

}  // namespace a3ps::harness
