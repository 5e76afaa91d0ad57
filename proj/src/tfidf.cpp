#include "ztc/tfidf.hpp"

#include <cmath>
#include <set>

#include "ztc/errors.hpp"
#include "ztc/vocab.hpp"

namespace ztc {

TfidfModel tfidf_fit(const std::vector<std::string>& docs) {
  if (docs.empty()) throw DataError("tfidf: empty fit corpus");
  TfidfModel m;
  m.n_docs = docs.size();
  std::unordered_map<std::string, size_t> df;
  for (const auto& text : docs) {
    std::set<std::string> seen;
    for (auto& tok : split_tokens(text)) seen.insert(std::move(tok));
    for (const auto& tok : seen) ++df[tok];
  }
  const double n = static_cast<double>(m.n_docs);
  for (const auto& [tok, d] : df) {
    m.idf[tok] = std::log(n / static_cast<double>(d)) + 1.0;
  }
  return m;
}

static std::unordered_map<std::string, double> weigh(const TfidfModel& m,
                                                     const std::string& text) {
  std::unordered_map<std::string, size_t> tf;
  for (auto& tok : split_tokens(text)) ++tf[tok];
  std::unordered_map<std::string, double> v;
  for (const auto& [tok, count] : tf) {
    auto it = m.idf.find(tok);
    if (it != m.idf.end()) v[tok] = static_cast<double>(count) * it->second;
  }
  return v;
}

double tfidf_score(const TfidfModel& model, const std::string& doc_text,
                   const std::string& class_text) {
  const auto a = weigh(model, doc_text);
  if (a.empty()) return 0.0;
  const auto b = weigh(model, class_text);
  if (b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, w] : a) {
    na += w * w;
    auto it = b.find(tok);
    if (it != b.end()) dot += w * it->second;
  }
  for (const auto& [tok, w] : b) nb += w * w;
  if (dot == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace ztc
