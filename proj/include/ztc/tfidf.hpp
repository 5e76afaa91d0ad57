#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ztc {

// Inverse document frequencies learned from a fit corpus. Terms never seen
// during fitting carry no weight and are ignored at scoring time.
struct TfidfModel {
  std::unordered_map<std::string, double> idf;  // idf = ln(N/df) + 1
  size_t n_docs = 0;
};

// Fit on rendered training documents only. Throws DataError when empty.
TfidfModel tfidf_fit(const std::vector<std::string>& docs);

// Cosine similarity between raw-count tf-idf vectors of the two texts.
// Returns 0 when either vector has no in-vocabulary mass.
double tfidf_score(const TfidfModel& model, const std::string& doc_text,
                   const std::string& class_text);

}  // namespace ztc
