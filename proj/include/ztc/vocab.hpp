#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ztc {

// Token ids are dense in [0, size()). Three reserved entries sit at the
// front: UNK for out-of-vocabulary tokens, SEP for cross-encoder
// concatenation, EMPTY standing in for empty token sequences.
class Vocabulary {
 public:
  static constexpr int32_t kUnk = 0;
  static constexpr int32_t kSep = 1;
  static constexpr int32_t kEmpty = 2;
  static constexpr size_t kNumSpecial = 3;

  Vocabulary();

  // Most frequent tokens across the given texts, capped at max_size entries
  // including specials. Frequency ties resolve lexicographically.
  static Vocabulary build(const std::vector<std::string>& texts, size_t max_size);

  size_t size() const { return tokens_.size(); }
  int32_t id_of(const std::string& token) const;  // UNK when absent
  const std::string& token_of(int32_t id) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
};

// Lowercases and splits on runs of non-alphanumeric characters.
std::vector<std::string> split_tokens(const std::string& text);

// split_tokens mapped through the vocabulary (OOV -> UNK), truncated to
// max_len. May be empty; encoders substitute the EMPTY token themselves.
std::vector<int32_t> tokenize(const std::string& text, const Vocabulary& vocab, size_t max_len);

}  // namespace ztc
