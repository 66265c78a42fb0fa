#include "a3ps/advice/text.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "a3ps/errors.hpp"

namespace a3ps::advice {

namespace {

// Sorted for binary search.
constexpr std::string_view kStopwords[] = {
    "a",          "about",   "after",    "again",  "against", "all",       "also",     "am",
    "an",         "and",     "any",      "are",    "as",      "at",        "be",       "because",
    "been",       "being",   "between",  "both",   "but",     "by",        "can",      "could",
    "did",        "do",      "does",     "doing",  "during",  "each",      "either",   "else",
    "even",       "ever",    "few",      "for",    "from",    "had",       "has",      "have",
    "having",     "he",      "her",      "here",   "hers",    "herself",   "him",      "himself",
    "his",        "how",     "i",        "if",     "in",      "into",      "is",       "it",
    "its",        "itself",  "just",     "may",    "me",      "might",     "more",     "most",
    "must",       "my",      "myself",   "no",     "nor",     "not",       "of",       "on",
    "once",       "only",    "or",       "other",  "ought",   "our",       "ours",     "ourselves",
    "own",        "same",    "shall",    "she",    "should",  "so",        "some",     "such",
    "than",       "that",    "the",      "their",  "theirs",  "them",      "themselves", "there",
    "these",      "they",    "this",     "those",  "though",  "to",        "too",      "until",
    "us",         "very",    "was",      "we",     "were",    "what",      "when",     "where",
    "which",      "while",   "who",      "whom",   "why",     "will",      "with",     "would",
    "you",        "your",    "yours",    "yourself", "yourselves",
};

static_assert(std::is_sorted(std::begin(kStopwords), std::end(kStopwords)));

}  // namespace

std::span<const std::string_view> stopwords() { return kStopwords; }

bool is_stopword(std::string_view token) {
  return std::binary_search(std::begin(kStopwords), std::end(kStopwords), token);
}

std::vector<std::string> preprocess(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') {
      cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cleaned.push_back(static_cast<char>(c));
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  std::istringstream in(cleaned);
  for (std::string tok; in >> tok;) {
    if (!is_stopword(tok)) tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  if (frozen_) throw ContractError("vocabulary is frozen; cannot add '" + token + "'");
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw ContractError("vocabulary index out of range: " + std::to_string(index));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) return {kPad};
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(index(t));
  return out;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  nlohmann::json j;
  j["format"] = "a3ps-vocabulary";
  j["version"] = 1;
  j["tokens"] = vocab.tokens();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write vocabulary " + path.string());
  out << j.dump() << '\n';
  if (!out) throw FileError("failed writing vocabulary " + path.string());
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot read vocabulary " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what(), 1);
  }
  if (j.value("format", "") != "a3ps-vocabulary" || j.value("version", 0) != 1) {
    throw ParseError("vocabulary: unsupported format or version", 1);
  }
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw ParseError("vocabulary: reserved entries missing", 1);
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i)) throw ParseError("vocabulary: duplicate token " + tokens[i], 1);
  }
  v.freeze();
  return v;
}

}  // namespace a3ps::advice
