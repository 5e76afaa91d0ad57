#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ztc/corpus.hpp"
#include "ztc/models.hpp"

namespace ztc {

struct TwoPhaseConfig {
  int k = 16;
};

struct InferenceReport {
  std::vector<std::string> class_ids;   // full universe, aligned with probabilities
  std::vector<double> probabilities;    // sigma(r) for candidates, exactly 0 otherwise
  std::vector<std::string> candidates;  // bi-encoder order, best first
  size_t cross_encoder_calls = 0;
  double savings_fraction = 0.0;

  // indices into class_ids by descending probability; ties by id.
  std::vector<size_t> ranking() const;
};

// Top-k classes by cached bi-encoder score, ties broken by lexicographic
// class id. One doc-encoder call via the cache.
std::vector<std::string> filter_candidates(const BiEncoderModel& m,
                                           const ClassEncodingCache& cache,
                                           const std::string& doc_text, int k,
                                           ScoreStats* stats = nullptr);

// Scores exactly the candidates with the cross-encoder. all_classes are
// (id, rendered text) pairs covering the evaluation universe.
InferenceReport rerank(const CrossEncoderModel& m, const std::string& doc_text,
                       const std::vector<std::string>& candidates,
                       const std::vector<std::pair<std::string, std::string>>& all_classes,
                       ScoreStats* stats = nullptr);

// Fraction of cross-encoder forward passes avoided per document: 1 - k/n.
double compute_savings(int k, int n_classes);

struct SweepRow {
  int k = 0;
  double lrap = 0.0;
  double macro_ap = 0.0;
  double savings = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  // standalone reference lines
  double bi_lrap = 0.0, bi_macro_ap = 0.0;
  double cross_lrap = 0.0, cross_macro_ap = 0.0;

  void save_csv(const std::string& path) const;  // k,lrap,macro_ap,savings
};

// Two-phase evaluation at each k over the corpus, plus standalone bi- and
// cross-encoder references. classes must cover the corpus label universe.
SweepTable sweep_candidates(const BiEncoderModel& bi, const CrossEncoderModel& cross,
                            const LabeledCorpus& eval_corpus,
                            const std::vector<std::pair<std::string, std::string>>& classes,
                            const std::vector<int>& k_values);

}  // namespace ztc
