#include "a3ps/advice/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "a3ps/errors.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::advice {

using nlohmann::json;

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "tune"; }

AdviceRecord make_record(const env::EnvConfig& cfg, std::uint64_t key, const env::GridState& state, env::Action action,
                         std::string advice, Split split) {
  AdviceRecord r;
  r.key = key;
  r.state = state;
  r.features = env::feature_frame(cfg, state);
  r.action = action;
  r.tokens = preprocess(advice);
  r.advice = std::move(advice);
  r.split = split;
  return r;
}

std::size_t train_count(std::size_t n) { return n * 9 / 10; }

std::vector<AdviceRecord> build_corpus(const env::EnvConfig& cfg, const std::vector<TemplateRule>& rules,
                                       const env::OraclePolicy& oracle, std::size_t n, std::uint64_t seed) {
  if (cfg.rows != oracle.config().rows || cfg.cols != oracle.config().cols) {
    throw ConfigError("corpus config does not match the oracle's grid");
  }
  std::vector<std::size_t> keys = env::reachable_keys(oracle);
  if (n > keys.size()) {
    throw CapacityError("requested " + std::to_string(n) + " records but only " + std::to_string(keys.size()) +
                        " distinct reachable states exist");
  }
  Rng rng(seed);
  rng.shuffle(keys.begin(), keys.end());
  const std::size_t n_train = train_count(n);
  std::vector<AdviceRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const env::GridState s = oracle.state_for_key(keys[i]);
    GeneratedAdvice g = generate_advice(s, rules, oracle);
    out.push_back(make_record(cfg, keys[i], s, g.action, std::move(g.text), i < n_train ? Split::Train : Split::Tune));
  }
  return out;
}

std::vector<AdviceRecord> select_split(const std::vector<AdviceRecord>& records, Split split) {
  std::vector<AdviceRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const AdviceRecord& r) { return r.split == split; });
  return out;
}

Vocabulary build_vocab(const std::vector<AdviceRecord>& records) {
  std::set<std::string> tokens;
  for (const AdviceRecord& r : records) {
    if (r.split == Split::Train) tokens.insert(r.tokens.begin(), r.tokens.end());
  }
  Vocabulary v;
  for (const std::string& t : tokens) v.add(t);
  v.freeze();
  return v;
}

std::string record_to_line(const AdviceRecord& r) {
  json cars = json::array();
  for (const env::Car& c : r.state.cars) cars.push_back({c.row, c.col, static_cast<int>(c.direction)});
  std::string features;
  features.reserve(r.features.size());
  for (double v : r.features) {
    if (v != 0.0 && v != 1.0) throw ContractError("corpus features must be binary");
    features.push_back(v == 0.0 ? '0' : '1');
  }
  json j;
  j["key"] = r.key;
  j["state"] = {{"agent", {r.state.agent.row, r.state.agent.col}},
                {"tick", r.state.tick},
                {"steps", r.state.steps},
                {"visited", r.state.visited_rows},
                {"cars", cars},
                {"features", features}};
  j["action"] = env::action_name(r.action);
  j["advice"] = r.advice;
  j["split"] = split_name(r.split);
  return j.dump();
}

AdviceRecord record_from_line(const std::string& line, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    AdviceRecord r;
    r.key = j.at("key").get<std::uint64_t>();
    const json& s = j.at("state");
    r.state.agent = {s.at("agent").at(0).get<int>(), s.at("agent").at(1).get<int>()};
    r.state.tick = s.at("tick").get<std::int64_t>();
    r.state.steps = s.at("steps").get<int>();
    r.state.visited_rows = s.at("visited").get<std::uint32_t>();
    for (const json& c : s.at("cars")) {
      const int dir = c.at(2).get<int>();
      if (dir != -1 && dir != 1) throw ParseError("car direction must be -1 or 1", line_number);
      r.state.cars.push_back({c.at(0).get<int>(), c.at(1).get<int>(), static_cast<env::CarDirection>(dir)});
    }
    for (char ch : s.at("features").get<std::string>()) {
      if (ch != '0' && ch != '1') throw ParseError("features must be a string of 0/1", line_number);
      r.features.push_back(ch == '1' ? 1.0 : 0.0);
    }
    r.action = env::action_from_name(j.at("action").get<std::string>());
    r.advice = j.at("advice").get<std::string>();
    r.tokens = preprocess(r.advice);
    const std::string split = j.at("split").get<std::string>();
    if (split == "train") {
      r.split = Split::Train;
    } else if (split == "tune") {
      r.split = Split::Tune;
    } else {
      throw ParseError("unknown split '" + split + "'", line_number);
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_number);
  } catch (const ContractError& e) {
    throw ParseError(e.what(), line_number);
  }
}

void save_corpus(const std::filesystem::path& path, const std::vector<AdviceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write corpus " + path.string());
  out << json{{"format", "a3ps-advice-corpus"}, {"version", kCorpusVersion}, {"records", records.size()}}.dump()
      << '\n';
  for (const AdviceRecord& r : records) out << record_to_line(r) << '\n';
  if (!out) throw FileError("failed writing corpus " + path.string());
}

std::vector<AdviceRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read corpus " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing corpus header", 1);
  try {
    const json h = json::parse(line);
    if (h.at("format").get<std::string>() != "a3ps-advice-corpus") throw ParseError("not a corpus file", 1);
    if (h.at("version").get<int>() != kCorpusVersion) throw ParseError("unsupported corpus version", 1);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad corpus header: ") + e.what(), 1);
  }
  std::vector<AdviceRecord> records;
  std::set<std::uint64_t> keys;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    AdviceRecord r = record_from_line(line, number);
    if (!keys.insert(r.key).second) throw ParseError("duplicate record key " + std::to_string(r.key), number);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace a3ps::advice
