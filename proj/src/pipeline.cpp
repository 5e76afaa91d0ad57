#include "ztc/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "ztc/errors.hpp"
#include "ztc/metrics.hpp"

namespace ztc {

std::vector<size_t> InferenceReport::ranking() const {
  std::vector<size_t> idx(class_ids.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (probabilities[a] != probabilities[b]) return probabilities[a] > probabilities[b];
    return class_ids[a] < class_ids[b];
  });
  return idx;
}

std::vector<std::string> filter_candidates(const BiEncoderModel& m,
                                           const ClassEncodingCache& cache,
                                           const std::string& doc_text, int k,
                                           ScoreStats* stats) {
  const int n = static_cast<int>(cache.class_ids.size());
  if (k < 1 || k > n) throw ConfigError("pipeline: k must be in [1, |classes|]");
  auto scores = score_biencoder_cached(m, cache, doc_text, stats);
  std::vector<size_t> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return cache.class_ids[a] < cache.class_ids[b];
  });
  std::vector<std::string> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(cache.class_ids[idx[i]]);
  return out;
}

InferenceReport rerank(const CrossEncoderModel& m, const std::string& doc_text,
                       const std::vector<std::string>& candidates,
                       const std::vector<std::pair<std::string, std::string>>& all_classes,
                       ScoreStats* stats) {
  std::unordered_map<std::string, size_t> pos;
  for (size_t i = 0; i < all_classes.size(); ++i) pos[all_classes[i].first] = i;

  InferenceReport rep;
  rep.class_ids.reserve(all_classes.size());
  for (const auto& [id, text] : all_classes) rep.class_ids.push_back(id);
  rep.probabilities.assign(all_classes.size(), 0.0);
  rep.candidates = candidates;
  for (const auto& c : candidates) {
    auto it = pos.find(c);
    if (it == pos.end()) throw DataError("pipeline: candidate '" + c + "' not in class universe");
    const double r = score_crossencoder(m, doc_text, all_classes[it->second].second, stats);
    rep.probabilities[it->second] = probability(r);
  }
  rep.cross_encoder_calls = candidates.size();
  rep.savings_fraction =
      compute_savings(static_cast<int>(candidates.size()), static_cast<int>(all_classes.size()));
  return rep;
}

double compute_savings(int k, int n_classes) {
  if (k < 1 || k > n_classes) throw ConfigError("pipeline: k must be in [1, n_classes]");
  return 1.0 - static_cast<double>(k) / static_cast<double>(n_classes);
}

void SweepTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("pipeline: cannot write '" + path + "'");
  out << "k,lrap,macro_ap,savings\n";
  char buf[224];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", r.k, r.lrap, r.macro_ap, r.savings);
    out << buf << "\n";
  }
}

SweepTable sweep_candidates(const BiEncoderModel& bi, const CrossEncoderModel& cross,
                            const LabeledCorpus& eval_corpus,
                            const std::vector<std::pair<std::string, std::string>>& classes,
                            const std::vector<int>& k_values) {
  eval_corpus.check_aligned();
  const auto& Y = eval_corpus.labels;
  const size_t ny = Y.num_classes();
  const size_t nd = eval_corpus.size();
  if (nd == 0) throw DataError("pipeline: empty evaluation corpus");

  // align class texts with the label-matrix columns
  std::unordered_map<std::string, const std::string*> texts;
  for (const auto& [id, text] : classes) texts[id] = &text;
  std::vector<std::pair<std::string, std::string>> aligned;
  aligned.reserve(ny);
  for (const auto& id : Y.class_ids()) {
    auto it = texts.find(id);
    if (it == texts.end()) throw DataError("pipeline: no class text for '" + id + "'");
    aligned.emplace_back(id, *it->second);
  }

  ClassEncodingCache cache = build_class_cache(bi, aligned);

  // Bi-encoder scores (phase one) and cross-encoder scores for all pairs.
  // Each k reuses these: the two-phase result at k depends only on which
  // candidates survive the filter, never on recomputation.
  Tensor r_bi(static_cast<int>(nd), static_cast<int>(ny));
  Tensor r_cross(static_cast<int>(nd), static_cast<int>(ny));
  for (size_t i = 0; i < nd; ++i) {
    const std::string text = render_document(eval_corpus.documents[i]);
    auto row = score_biencoder_cached(bi, cache, text);
    for (size_t j = 0; j < ny; ++j) r_bi(static_cast<int>(i), static_cast<int>(j)) = row[j];
    for (size_t j = 0; j < ny; ++j)
      r_cross(static_cast<int>(i), static_cast<int>(j)) =
          score_crossencoder(cross, text, aligned[j].second);
  }

  SweepTable table;
  table.bi_lrap = lrap(Y, r_bi);
  table.bi_macro_ap = macro_ap(Y, r_bi);
  table.cross_lrap = lrap(Y, r_cross);
  table.cross_macro_ap = macro_ap(Y, r_cross);

  std::vector<size_t> idx(ny);
  for (int k : k_values) {
    if (k < 1 || k > static_cast<int>(ny))
      throw ConfigError("pipeline: sweep k out of range");
    Tensor probs(static_cast<int>(nd), static_cast<int>(ny));
    for (size_t i = 0; i < nd; ++i) {
      for (size_t j = 0; j < ny; ++j) idx[j] = j;
      std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        const double sa = r_bi(static_cast<int>(i), static_cast<int>(a));
        const double sb = r_bi(static_cast<int>(i), static_cast<int>(b));
        if (sa != sb) return sa > sb;
        return Y.class_ids()[a] < Y.class_ids()[b];
      });
      for (int c = 0; c < k; ++c) {
        const size_t j = idx[c];
        probs(static_cast<int>(i), static_cast<int>(j)) =
            probability(r_cross(static_cast<int>(i), static_cast<int>(j)));
      }
    }
    SweepRow row;
    row.k = k;
    row.lrap = lrap(Y, probs);
    row.macro_ap = macro_ap(Y, probs);
    row.savings = compute_savings(k, static_cast<int>(ny));
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace ztc
