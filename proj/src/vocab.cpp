#include "ztc/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ztc/errors.hpp"

namespace ztc {

static const char* kSpecials[] = {"<unk>", "<sep>", "<empty>"};

Vocabulary::Vocabulary() {
  for (const char* s : kSpecials) {
    index_[s] = static_cast<int32_t>(tokens_.size());
    tokens_.push_back(s);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, size_t max_size) {
  if (max_size < kNumSpecial + 1) throw ConfigError("vocab: max_size too small");
  std::map<std::string, size_t> freq;
  for (const auto& t : texts) {
    for (auto& tok : split_tokens(t)) ++freq[tok];
  }
  std::vector<std::pair<std::string, size_t>> entries(freq.begin(), freq.end());
  // stable: freq map is already lexicographic, so equal counts keep that order
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : entries) {
    if (v.tokens_.size() >= max_size) break;
    v.index_[tok] = static_cast<int32_t>(v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
    throw DataError("vocab: token id out of range");
  return tokens_[id];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumSpecial) throw DataError("vocab: token list missing specials");
  for (size_t i = 0; i < kNumSpecial; ++i) {
    if (tokens[i] != kSpecials[i]) throw DataError("vocab: token list missing specials");
  }
  Vocabulary v;
  for (size_t i = kNumSpecial; i < tokens.size(); ++i) {
    if (v.index_.count(tokens[i])) throw DataError("vocab: duplicate token '" + tokens[i] + "'");
    v.index_[tokens[i]] = static_cast<int32_t>(v.tokens_.size());
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int32_t> tokenize(const std::string& text, const Vocabulary& vocab, size_t max_len) {
  std::vector<int32_t> out;
  for (const auto& tok : split_tokens(text)) {
    if (out.size() >= max_len) break;
    out.push_back(vocab.id_of(tok));
  }
  return out;
}

}  // namespace ztc
