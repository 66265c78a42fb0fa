#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>

#include "a3ps/ada/model.hpp"
#include "a3ps/errors.hpp"
#include "a3ps/nn/checkpoint.hpp"
#include "doctest.h"

using namespace a3ps;
using namespace a3ps::ada;
using env::Action;

namespace {

const env::EnvConfig& grid() {
  static const env::EnvConfig cfg = env::EnvConfig::standard();
  return cfg;
}

const env::OraclePolicy& oracle() {
  static const env::OraclePolicy o = env::solve_oracle(grid(), env::RewardConfig::dense());
  return o;
}

AdaConfig config_for(const advice::Vocabulary& vocab) {
  AdaConfig c;
  c.frame_size = env::feature_frame_size(grid());
  c.vocab_size = static_cast<int>(vocab.size());
  return c;
}

struct Trained {
  std::vector<advice::AdviceRecord> corpus;
  advice::Vocabulary vocab;
  std::vector<Example> train, tune;
  AdaModel model;
  TrainReport report;
};

// Default-scale corpus and a model trained on it, shared across cases.
Trained& trained() {
  static Trained t = [] {
    auto corpus = advice::build_corpus(grid(), advice::default_rules(), oracle(), 1935, 11);
    auto vocab = advice::build_vocab(corpus);
    auto train = make_examples(advice::select_split(corpus, advice::Split::Train), vocab);
    auto tune = make_examples(advice::select_split(corpus, advice::Split::Tune), vocab);
    Rng rng(1);
    AdaModel model(config_for(vocab), rng);
    AdaTrainConfig tc;
    tc.epochs = 6;
    TrainReport report = train_supervised(model, train, tune, tc);
    return Trained{std::move(corpus), std::move(vocab), std::move(train), std::move(tune), std::move(model),
                   std::move(report)};
  }();
  return t;
}

std::size_t argmax(const blend::ActionScores& s) {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

// Catch-all template of the given action from the default table.
std::string fallback_text(Action a) {
  std::string text;
  for (const advice::TemplateRule& r : advice::default_rules()) {
    if (r.action == a) text = r.text;
  }
  return text;
}

}  // namespace

TEST_CASE("zero-initialized output layer scores every action zero") {
  advice::Vocabulary v;
  v.add("move");
  AdaConfig c;
  c.frame_size = 6;
  c.vocab_size = static_cast<int>(v.size());
  c.zero_init_output = true;
  Rng rng(2);
  const AdaModel m(c, rng);
  const std::vector<double> f{1, 0, 0, 1, 0, 1};
  for (double s : action_scores(m, f, {2, 1})) CHECK(s == 0.0);
}

TEST_CASE("scores are pure, finite and treat empty advice as padding") {
  Trained& t = trained();
  const Example& ex = t.tune.front();
  CHECK(action_scores(t.model, ex.features, ex.tokens) == action_scores(t.model, ex.features, ex.tokens));
  CHECK(action_scores(t.model, ex.features, {}) ==
        action_scores(t.model, ex.features, {advice::Vocabulary::kPad}));
  for (const Example& e : t.train) {
    for (double s : action_scores(t.model, e.features, e.tokens)) REQUIRE(std::isfinite(s));
  }
  CHECK_THROWS_AS(action_scores(t.model, std::vector<double>(7, 0.0), ex.tokens), ShapeError);
  CHECK_THROWS_AS(action_scores(t.model, ex.features, {static_cast<int>(t.vocab.size())}), ShapeError);
}

TEST_CASE("ragged batches match one-at-a-time scoring") {
  Trained& t = trained();
  std::vector<AdaInput> batch;
  for (std::size_t i = 0; i < 12; ++i) batch.push_back({&t.tune[i].features, &t.tune[i].tokens});
  const std::vector<int> empty;
  batch.push_back({&t.tune[0].features, &empty});
  nn::Tape tape(false);
  const nn::Tensor out = t.model.forward(tape, batch).value();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto single = action_scores(t.model, *batch[i].features, *batch[i].tokens);
    for (std::size_t a = 0; a < env::kNumActions; ++a) CHECK(out(i, a) == doctest::Approx(single[a]).epsilon(1e-12));
  }
}

TEST_CASE("default-scale corpus trains to a useful classifier") {
  Trained& t = trained();
  const Evaluation tune = evaluate(t.model, t.tune);
  MESSAGE("tune accuracy " << tune.accuracy << " after best epoch " << t.report.best_epoch);
  CHECK(tune.accuracy >= 0.8);
  CHECK(t.report.best_epoch >= 0);

  std::array<std::size_t, env::kNumActions> per_label{};
  for (const Example& e : t.tune) ++per_label[static_cast<std::size_t>(e.label)];
  for (std::size_t a = 0; a < env::kNumActions; ++a) {
    CHECK(std::accumulate(tune.confusion[a].begin(), tune.confusion[a].end(), std::size_t{0}) == per_label[a]);
  }
}

TEST_CASE("advice text drives the prediction") {
  Trained& t = trained();
  std::size_t changed = 0;
  for (const Example& e : t.tune) {
    const Action contrary = env::action_at((e.label + 2) % env::kNumActions);
    const std::vector<int> swapped = t.vocab.encode(advice::preprocess(fallback_text(contrary)));
    if (argmax(action_scores(t.model, e.features, e.tokens)) != argmax(action_scores(t.model, e.features, swapped))) {
      ++changed;
    }
  }
  const double share = static_cast<double>(changed) / static_cast<double>(t.tune.size());
  MESSAGE("argmax changed for " << share << " of tune states");
  CHECK(share >= 0.5);
}

TEST_CASE("small corpus with arbitrary labels is memorized") {
  auto corpus = advice::build_corpus(grid(), advice::default_rules(), oracle(), 20, 5);
  for (auto& r : corpus) r.split = advice::Split::Train;
  const auto vocab = advice::build_vocab(corpus);
  std::vector<Example> train = make_examples(corpus, vocab);
  Rng labels(6);
  for (Example& e : train) e.label = static_cast<int>(labels.below(env::kNumActions));
  Rng rng(7);
  AdaModel m(config_for(vocab), rng);
  AdaTrainConfig tc;
  tc.epochs = 500;
  tc.batch_size = 20;
  const TrainReport report = train_supervised(m, train, {}, tc);
  double best = 0.0;
  for (const EpochMetrics& em : report.epochs) best = std::max(best, em.train_accuracy);
  CHECK(best >= 0.95);
  CHECK(evaluate(m, train).accuracy >= 0.95);
}

TEST_CASE("permuted labels leave tune accuracy at chance") {
  // Class-balanced sample so chance is exactly one in five.
  std::map<Action, std::vector<std::size_t>> by_action;
  for (std::size_t k : env::reachable_keys(oracle())) by_action[oracle().at(k).action].push_back(k);
  Rng pick(8);
  std::vector<advice::AdviceRecord> records;
  for (auto& [action, keys] : by_action) {
    pick.shuffle(keys.begin(), keys.end());
    for (std::size_t i = 0; i < 100; ++i) {
      const env::GridState s = oracle().state_for_key(keys[i]);
      const advice::GeneratedAdvice g = advice::generate_advice(s, advice::default_rules(), oracle());
      records.push_back(advice::make_record(grid(), keys[i], s, g.action, g.text, advice::Split::Train));
    }
  }
  pick.shuffle(records.begin(), records.end());
  std::vector<Action> labels;
  for (const auto& r : records) labels.push_back(r.action);
  pick.shuffle(labels.begin(), labels.end());
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].action = labels[i];
    records[i].split = i < 400 ? advice::Split::Train : advice::Split::Tune;
  }
  const auto vocab = advice::build_vocab(records);
  const auto train = make_examples(advice::select_split(records, advice::Split::Train), vocab);
  const auto tune = make_examples(advice::select_split(records, advice::Split::Tune), vocab);
  Rng rng(9);
  AdaModel m(config_for(vocab), rng);
  train_supervised(m, train, tune, AdaTrainConfig{});
  const double acc = evaluate(m, tune).accuracy;
  MESSAGE("permuted-label tune accuracy " << acc);
  CHECK(acc >= 0.1);
  CHECK(acc <= 0.3);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto corpus = advice::build_corpus(grid(), advice::default_rules(), oracle(), 60, 3);
  const auto vocab = advice::build_vocab(corpus);
  const auto train = make_examples(advice::select_split(corpus, advice::Split::Train), vocab);
  const auto tune = make_examples(advice::select_split(corpus, advice::Split::Tune), vocab);
  AdaTrainConfig tc;
  tc.epochs = 4;
  auto run = [&] {
    Rng rng(10);
    AdaModel m(config_for(vocab), rng);
    const TrainReport r = train_supervised(m, train, tune, tc);
    return std::make_pair(r.epochs, nn::parameter_checksum(m.parameters()));
  };
  CHECK(run() == run());
  Rng rng(1);
  AdaModel m(config_for(vocab), rng);
  CHECK_THROWS_AS(train_supervised(m, {}, tune, tc), ContractError);
}

TEST_CASE("model checkpoints round trip") {
  Trained& t = trained();
  const auto path = std::filesystem::temp_directory_path() / "a3ps_test_ada.nnck";
  save_model(path, t.model);
  AdaModel loaded = load_model(path);
  CHECK(nn::parameter_checksum(loaded.parameters()) ==
        nn::parameter_checksum(const_cast<AdaModel&>(t.model).parameters()));
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(action_scores(loaded, t.tune[i].features, t.tune[i].tokens) ==
          action_scores(t.model, t.tune[i].features, t.tune[i].tokens));
  }
  std::filesystem::remove(path);
}
