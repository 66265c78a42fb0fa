#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace a3ps::advice {

// Fixed function-word list removed by preprocess(). Direction and movement
// words are deliberately absent.
std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view token);

// Lowercase, keep [a-z0-9] and whitespace, split, drop stopwords.
std::vector<std::string> preprocess(std::string_view text);

std::string join(const std::vector<std::string>& tokens);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  // Throws ContractError once frozen.
  int add(const std::string& token);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t size() const { return tokens_.size(); }
  // kUnk for unknown tokens.
  int index(const std::string& token) const;
  const std::string& token(int index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Unknown tokens map to kUnk; an empty list encodes as a single kPad.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && frozen_ == o.frozen_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  bool frozen_ = false;
};

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace a3ps::advice
