#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a3ps/advice/templates.hpp"
#include "a3ps/advice/text.hpp"
#include "a3ps/env/frogger.hpp"
#include "a3ps/env/oracle.hpp"

namespace a3ps::advice {

enum class Split { Train, Tune };

std::string_view split_name(Split s);

struct AdviceRecord {
  std::uint64_t key = 0;  // deduplication key (oracle key for generated records)
  env::GridState state;
  std::vector<double> features;  // single feature frame of state
  env::Action action = env::Action::NoOp;
  std::string advice;
  std::vector<std::string> tokens;  // preprocess(advice)
  Split split = Split::Train;

  bool operator==(const AdviceRecord&) const = default;
};

AdviceRecord make_record(const env::EnvConfig& cfg, std::uint64_t key, const env::GridState& state, env::Action action,
                         std::string advice, Split split);

// Training share of an n-record corpus: floor(0.9 n).
std::size_t train_count(std::size_t n);

// n distinct reachable states drawn uniformly without replacement; the
// first train_count(n) records form the training split.
std::vector<AdviceRecord> build_corpus(const env::EnvConfig& cfg, const std::vector<TemplateRule>& rules,
                                       const env::OraclePolicy& oracle, std::size_t n, std::uint64_t seed);

std::vector<AdviceRecord> select_split(const std::vector<AdviceRecord>& records, Split split);

// Frozen vocabulary over the training split, tokens in sorted order after
// the reserved entries.
Vocabulary build_vocab(const std::vector<AdviceRecord>& records);

// Line-delimited JSON: a version header line, then one record per line.
inline constexpr int kCorpusVersion = 1;
std::string record_to_line(const AdviceRecord& r);
AdviceRecord record_from_line(const std::string& line, std::size_t line_number);
void save_corpus(const std::filesystem::path& path, const std::vector<AdviceRecord>& records);
std::vector<AdviceRecord> load_corpus(const std::filesystem::path& path);

}  // namespace a3ps::advice
