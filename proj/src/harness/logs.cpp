#include "a3ps/harness/logs.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "a3ps/errors.hpp"

namespace a3ps::harness {

double trailing_mean(const std::vector<double>& series, std::size_t i, int window) {
  if (window < 1) throw ContractError("smoothing window must be >= 1");
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t first = i + 1 >= w ? i + 1 - w : 0;
  double sum = 0.0;
  for (std::size_t k = first; k <= i; ++k) sum += series[k];
  return sum / static_cast<double>(i - first + 1);
}

std::vector<double> smooth_curve(const std::vector<double>& series, int window) {
  if (window < 1) throw ContractError("smoothing window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = trailing_mean(series, i, window);
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw ContractError("cannot format number");
  return std::string(buf, res.ptr);
}

std::vector<double> rewards_of(const std::vector<EpisodeLog>& logs) {
  std::vector<double> r;
  r.reserve(logs.size());
  for (const EpisodeLog& l : logs) r.push_back(l.reward);
  return r;
}

std::string csv_row(const EpisodeLog& l, double smoothed) {
  return std::to_string(l.episode) + ',' + format_number(l.reward) + ',' + std::to_string(l.steps) + ',' +
         (l.reached_goal ? '1' : '0') + ',' + format_number(l.alpha) + ',' + format_number(smoothed);
}

std::string format_csv(const std::vector<EpisodeLog>& logs, int window) {
  if (logs.empty()) throw ContractError("emit_csv: no episodes");
  const std::vector<double> smoothed = smooth_curve(rewards_of(logs), window);
  std::string out = std::string(kCsvHeader) + '\n';
  for (std::size_t i = 0; i < logs.size(); ++i) out += csv_row(logs[i], smoothed[i]) + '\n';
  return out;
}

void emit_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& logs, int window) {
  write_text(path, format_csv(logs, window));
}

namespace {

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("bad CSV field '" + std::string(s) + "'", line);
  }
  return v;
}

}  // namespace

std::vector<EpisodeLog> read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("unexpected CSV header", 1);
  std::vector<EpisodeLog> logs;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      f.push_back(rest.substr(0, pos));
    }
    f.push_back(rest);
    if (f.size() != 6) throw ParseError("expected 6 CSV fields", number);
    EpisodeLog l;
    l.episode = parse_field<std::int64_t>(f[0], number);
    l.reward = parse_field<double>(f[1], number);
    l.steps = parse_field<int>(f[2], number);
    const int goal = parse_field<int>(f[3], number);
    if (goal != 0 && goal != 1) throw ParseError("reached_goal must be 0 or 1", number);
    l.reached_goal = goal == 1;
    l.alpha = parse_field<double>(f[4], number);
    parse_field<double>(f[5], number);
    logs.push_back(l);
  }
  return logs;
}

std::string format_plotdata(const std::vector<NamedSeries>& runs) {
  std::string out = "episode";
  std::size_t longest = 0;
  for (const NamedSeries& r : runs) {
    out += ',' + r.name;
    longest = std::max(longest, r.values.size());
  }
  out += '\n';
  for (std::size_t i = 0; i < longest; ++i) {
    out += std::to_string(i);
    for (const NamedSeries& r : runs) {
      out += ',';
      if (i < r.values.size()) out += format_number(r.values[i]);
    }
    out += '\n';
  }
  return out;
}

void emit_plotdata(const std::filesystem::path& path, const std::vector<NamedSeries>& runs) {
  write_text(path, format_plotdata(runs));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
  if (!out) throw FileError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace a3ps::harness
