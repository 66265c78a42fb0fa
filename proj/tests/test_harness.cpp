#include <filesystem>
#include <fstream>
#include <random>

#include "a3ps/advice/corpus.hpp"
#include "a3ps/errors.hpp"
#include "a3ps/harness/compare.hpp"
#include "a3ps/harness/experiment.hpp"
#include "a3ps/nn/checkpoint.hpp"
#include "doctest.h"

using namespace a3ps;
using namespace a3ps::harness;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed when the test case ends.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("a3ps_harness_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) { return read_text(p); }

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.episodes = 40;
  c.seeds = {3};
  c.embedding = 16;
  c.hidden = 16;
  c.ppo.rollout_length = 32;
  c.ppo.minibatch_size = 16;
  c.ppo.learning_rate = 1e-3;
  c.alpha.decay_interval = 10;
  c.smoothing_window = 5;
  return c;
}

// Untrained classifier over a small corpus vocabulary; enough to exercise
// the blended path.
const Advisor& advisor() {
  static const Advisor a = [] {
    const env::EnvConfig cfg = env::EnvConfig::standard();
    const env::OraclePolicy oracle = env::solve_oracle(cfg, env::RewardConfig::dense());
    const auto corpus = advice::build_corpus(cfg, advice::default_rules(), oracle, 200, 1);
    advice::Vocabulary vocab = advice::build_vocab(corpus);
    ada::AdaConfig ac;
    ac.frame_size = env::feature_frame_size(cfg);
    ac.vocab_size = static_cast<int>(vocab.size());
    ac.state_hidden = 16;
    ac.text_hidden = 16;
    ac.fusion_hidden = 16;
    Rng rng(2);
    return Advisor(cfg, std::move(vocab), ada::AdaModel(ac, rng));
  }();
  return a;
}

EpisodeLog log_of(std::int64_t ep, double reward, int steps, bool goal, double alpha) {
  EpisodeLog l;
  l.episode = ep;
  l.reward = reward;
  l.steps = steps;
  l.reached_goal = goal;
  l.alpha = alpha;
  return l;
}

}  // namespace

TEST_CASE("smooth_curve is a trailing mean") {
  CHECK(smooth_curve({4, 4, 4, 4}, 3) == std::vector<double>{4, 4, 4, 4});
  CHECK(smooth_curve({0, 10}, 2) == std::vector<double>{0, 5});
  const std::vector<double> s{1.5, -2, 7, 0.25};
  CHECK(smooth_curve(s, 1) == s);
  CHECK(smooth_curve({1, 2, 3, 4, 5}, 3) == std::vector<double>{1, 1.5, 2, 3, 4});
  CHECK(smooth_curve({}, 4).empty());
  CHECK_THROWS_AS(smooth_curve(s, 0), ContractError);
}

TEST_CASE("episode CSV header matches the golden file") {
  const fs::path golden = fs::path(A3PS_SOURCE_DIR) / "tests" / "golden" / "episode_csv_header.txt";
  CHECK(slurp(golden) == std::string(kCsvHeader) + '\n');
  TempDir dir;
  emit_csv(dir.path / "one.csv", {log_of(0, -20, 3, false, 0.6)}, 100);
  const std::string text = slurp(dir.path / "one.csv");
  CHECK(text == slurp(golden) + "0,-20,3,0,0.6,-20\n");
  CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("CSV round trip preserves every value") {
  std::vector<EpisodeLog> logs{log_of(0, 0.1, 5, false, 0.6), log_of(1, 1.0 / 3.0, 7, true, 0.4),
                               log_of(2, -1234567.125, 50, false, 0.2), log_of(3, 1e-17, 1, true, 0)};
  TempDir dir;
  emit_csv(dir.path / "r.csv", logs, 2);
  const std::vector<EpisodeLog> back = read_csv(dir.path / "r.csv");
  REQUIRE(back.size() == logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) CHECK(back[i].same_outcome(logs[i]));
  CHECK_THROWS_AS(emit_csv(dir.path / "missing" / "x.csv", logs, 2), FileError);
  CHECK_THROWS_AS(emit_csv(dir.path / "e.csv", {}, 2), ContractError);
}

TEST_CASE("malformed CSV is rejected with its line number") {
  TempDir dir;
  write_text(dir.path / "bad.csv", std::string(kCsvHeader) + "\n0,1,2,0,0,1\n1,x,2,0,0,1\n");
  try {
    read_csv(dir.path / "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  write_text(dir.path / "hdr.csv", "episode,reward\n");
  CHECK_THROWS_AS(read_csv(dir.path / "hdr.csv"), ParseError);
}

TEST_CASE("plot data pads shorter runs with empty cells") {
  const std::string t = format_plotdata({{"a", {1, 2, 3}}, {"b", {0.5}}});
  CHECK(t == "episode,a,b\n0,1,0.5\n1,2,\n2,3,\n");
}

TEST_CASE("compare_runs on identical logs reports zero deltas") {
  RunSet runs;
  for (std::uint64_t s : {0u, 1u, 2u}) {
    std::vector<EpisodeLog> logs;
    for (int i = 0; i < 30; ++i) logs.push_back(log_of(i, i % 7 == 3 ? 400 : -20, 5, i % 7 == 3, 0));
    runs[s] = logs;
  }
  const ComparisonReport r = compare_runs(runs, runs, 10, 12);
  REQUIRE(r.seeds.size() == 3);
  for (const SeedComparison& c : r.seeds) {
    CHECK(c.a3ps.first_goal == c.eda.first_goal);
    CHECK(c.a3ps.early_mean == c.eda.early_mean);
    CHECK(c.a3ps.final_mean == c.eda.final_mean);
    CHECK(c.a3ps.final_goal_rate == c.eda.final_goal_rate);
    CHECK_FALSE(c.earlier_goal);
    CHECK_FALSE(c.higher_early);
  }
  CHECK(r.seeds[0].a3ps.first_goal == 3);
  // Goals fall on 3, 10, 17, 24; only 24 is among the last 12 episodes.
  CHECK(r.seeds[0].a3ps.final_goal_rate == doctest::Approx(1.0 / 12.0));
  const std::string text = format_report(r);
  CHECK(text == format_report(compare_runs(runs, runs, 10, 12)));
  CHECK(text.find(",0.000,") != std::string::npos);
}

TEST_CASE("compare_runs verdicts follow the two-thirds rule") {
  auto run = [](int first_goal, double reward, int goals_at_end) {
    std::vector<EpisodeLog> logs;
    for (int i = 0; i < 20; ++i) {
      const bool goal = i == first_goal || i >= 20 - goals_at_end;
      logs.push_back(log_of(i, goal ? 400 : reward, 4, goal, 0));
    }
    return logs;
  };
  RunSet a3ps{{0, run(2, 0, 10)}, {1, run(5, 0, 6)}, {2, run(15, -20, 10)}};
  RunSet eda{{0, run(9, -20, 0)}, {1, run(-1, -20, 0)}, {2, run(4, 0, 1)}};
  const ComparisonReport r = compare_runs(a3ps, eda, 5, 10);
  CHECK(r.earlier_goal_wins == 2);
  CHECK(r.higher_early_wins == 2);
  CHECK(r.early_learning_verdict());
  CHECK(r.a3ps_high_final == 3);
  CHECK(r.eda_low_final == 2);
  CHECK(r.final_rate_verdict());
  CHECK(r.seeds[1].eda.first_goal == std::nullopt);
  CHECK(r.seeds[2].a3ps.first_goal == 10);
  CHECK(r.seeds[2].eda.final_goal_rate == doctest::Approx(0.1));
  eda[1] = run(-1, -20, 3);
  CHECK_FALSE(compare_runs(a3ps, eda, 5, 10).final_rate_verdict());
}

TEST_CASE("compare_runs rejects mismatched runs") {
  RunSet a{{0, {log_of(0, 1, 1, false, 0), log_of(1, 1, 1, false, 0)}}};
  RunSet b{{0, {log_of(0, 1, 1, false, 0)}}};
  RunSet c{{1, {log_of(0, 1, 1, false, 0), log_of(1, 1, 1, false, 0)}}};
  CHECK_THROWS_AS(compare_runs(a, b), ContractError);
  CHECK_THROWS_AS(compare_runs(a, c), ContractError);
  CHECK_THROWS_AS(compare_runs(a, {}), ContractError);
}

TEST_CASE("experiment config invariants") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.episodes = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.mode = AgentMode::A3ps;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.ada_checkpoint = "/nonexistent/ada.nnck";
  c.vocabulary = "/nonexistent/vocab.json";
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(load_advisor(c), FileError);
  CHECK(small_config().describe() == small_config().describe());
  CHECK(ExperimentConfig::long_alpha().decay_interval == 2000);
  CHECK(blend::alpha_at(ExperimentConfig::desk_alpha(), 899) > 0.0);
  CHECK(blend::alpha_at(ExperimentConfig::desk_alpha(), 900) == 0.0);
}

TEST_CASE("learning-rate annealing is part of the run") {
  TempDir on, off;
  ExperimentConfig c = small_config();
  c.output_dir = on.path;
  run_seed(c, 3, nullptr);
  c.lr_anneal = false;
  c.output_dir = off.path;
  run_seed(c, 3, nullptr);
  CHECK(slurp(on.path / "seed_3_final.nnck") != slurp(off.path / "seed_3_final.nnck"));
  CHECK(small_config().describe().find("lr-anneal = true\n") != std::string::npos);
  CHECK(c.describe().find("lr-anneal = false\n") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical CSVs") {
  TempDir a, b;
  ExperimentConfig c = small_config();
  c.output_dir = a.path;
  const SeedResult ra = run_seed(c, 3, nullptr);
  c.output_dir = b.path;
  const SeedResult rb = run_seed(c, 3, nullptr);
  CHECK(ra.completed);
  CHECK(ra.updates.size() > 2);
  CHECK(slurp(seed_csv_path(a.path, 3)) == slurp(seed_csv_path(b.path, 3)));
  CHECK(slurp(a.path / "seed_3_updates.csv") == slurp(b.path / "seed_3_updates.csv"));
  CHECK(slurp(a.path / "seed_3_final.nnck") == slurp(b.path / "seed_3_final.nnck"));
  // The CSV on disk is the log of the run.
  const auto logs = read_csv(seed_csv_path(a.path, 3));
  REQUIRE(logs.size() == 40);
  for (std::size_t i = 0; i < logs.size(); ++i) CHECK(logs[i].same_outcome(ra.episodes[i]));
  c.output_dir = a.path;
  run_seed(c, 4, nullptr);
  CHECK(slurp(seed_csv_path(a.path, 4)) != slurp(seed_csv_path(a.path, 3)));
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  for (AgentMode mode : {AgentMode::EdaOnly, AgentMode::A3ps}) {
    CAPTURE(agent_mode_name(mode));
    TempDir whole, split;
    ExperimentConfig c = small_config();
    c.mode = mode;
    c.ada_checkpoint = "unused.nnck";
    c.vocabulary = "unused.json";
    const Advisor* adv = mode == AgentMode::A3ps ? &advisor() : nullptr;
    c.output_dir = whole.path;
    const SeedResult full = run_seed(c, 3, adv);

    c.output_dir = split.path;
    c.checkpoint_every = 7;
    RunOptions stop;
    stop.stop_after = 17;
    const SeedResult part = run_seed(c, 3, adv, stop);
    CHECK_FALSE(part.completed);
    CHECK(part.episodes.size() == 17);
    RunOptions resume;
    resume.resume = true;
    const SeedResult rest = run_seed(c, 3, adv, resume);
    CHECK(rest.completed);

    CHECK(slurp(seed_csv_path(whole.path, 3)) == slurp(seed_csv_path(split.path, 3)));
    CHECK(slurp(whole.path / "seed_3_updates.csv") == slurp(split.path / "seed_3_updates.csv"));
    CHECK(slurp(whole.path / "seed_3_final.nnck") == slurp(split.path / "seed_3_final.nnck"));
  }
}

TEST_CASE("resume refuses a checkpoint from another configuration") {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.output_dir = dir.path;
  RunOptions stop;
  stop.stop_after = 5;
  run_seed(c, 3, nullptr, stop);
  c.ppo.learning_rate = 2e-3;
  RunOptions resume;
  resume.resume = true;
  CHECK_THROWS_AS(run_seed(c, 3, nullptr, resume), ConfigError);
}

TEST_CASE("advisor weights stay frozen across 100 shaped episodes") {
  ExperimentConfig c = small_config();
  c.mode = AgentMode::A3ps;
  c.episodes = 100;
  c.alpha.decay_interval = 1000;  // alpha 0.6 throughout
  c.ada_checkpoint = "unused.nnck";
  c.vocabulary = "unused.json";
  const std::uint64_t before = advisor().checksum();
  const SeedResult r = run_seed(c, 5, &advisor());
  REQUIRE(r.advisor_checksum_before.has_value());
  CHECK(*r.advisor_checksum_before == before);
  CHECK(*r.advisor_checksum_after == before);
  CHECK(advisor().checksum() == before);
  CHECK(r.updates.size() > 0);
  for (const EpisodeLog& l : r.episodes) CHECK(l.alpha == 0.6);
}

TEST_CASE("eda-only runs never consult the advisor") {
  ExperimentConfig c = small_config();
  c.episodes = 12;
  const SeedResult r = run_seed(c, 1, nullptr);
  for (const EpisodeLog& l : r.episodes) CHECK(l.alpha == 0.0);
  c.mode = AgentMode::A3ps;
  c.ada_checkpoint = "unused.nnck";
  c.vocabulary = "unused.json";
  CHECK_THROWS_AS(run_seed(c, 1, nullptr), ContractError);
}

TEST_CASE("run_experiment writes per-seed CSVs and plot data") {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.episodes = 15;
  c.seeds = {0, 1};
  c.output_dir = dir.path;
  const auto results = run_experiment(c, nullptr);
  REQUIRE(results.size() == 2);
  CHECK(fs::exists(seed_csv_path(dir.path, 0)));
  CHECK(fs::exists(seed_csv_path(dir.path, 1)));
  CHECK(slurp(dir.path / "config.ini") == c.describe());
  const std::string plot = slurp(dir.path / "plotdata.csv");
  CHECK(plot.rfind("episode,seed_0,seed_1\n", 0) == 0);
  const RunSet back = read_run_dir(dir.path);
  REQUIRE(back.size() == 2);
  CHECK(back.at(1).size() == 15);
  const auto g = greedy_episode(c, *results[0].model, 9);
  CHECK(g.steps > 0);
}
