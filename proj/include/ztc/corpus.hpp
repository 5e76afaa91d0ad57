#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ztc {

struct Document {
  std::string id;
  // Ordered (field name, content) pairs; canonically Title, Employer, Description.
  std::vector<std::pair<std::string, std::string>> fields;
};

// "Title: {t}, Employer: {e}, Description: {d}" for the canonical fields;
// in general joins "{name}: {content}" with ", " in field order.
std::string render_document(const Document& d);

// Sparse binary document x class matrix. Documents are rows, classes columns.
class LabelMatrix {
 public:
  LabelMatrix() = default;

  // pairs are (doc index, class index) into the given id lists. class_ids are
  // sorted internally; doc order is preserved.
  static LabelMatrix build(std::vector<std::string> doc_ids,
                           std::vector<std::string> class_ids,
                           const std::vector<std::pair<uint32_t, uint32_t>>& pairs);

  size_t num_docs() const { return doc_ids_.size(); }
  size_t num_classes() const { return class_ids_.size(); }

  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::string>& class_ids() const { return class_ids_; }

  // Sorted class indices labeling document i.
  const std::vector<uint32_t>& labels_of(size_t doc) const { return rows_[doc]; }
  // Sorted doc indices labeled with class j.
  const std::vector<uint32_t>& docs_of(size_t cls) const { return cols_[cls]; }

  bool has(size_t doc, size_t cls) const;

  size_t doc_index(const std::string& id) const;
  size_t class_index(const std::string& id) const;
  bool has_class(const std::string& id) const { return class_index_.count(id) > 0; }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::string> class_ids_;
  std::vector<std::vector<uint32_t>> rows_;
  std::vector<std::vector<uint32_t>> cols_;
  std::unordered_map<std::string, size_t> doc_index_;
  std::unordered_map<std::string, size_t> class_index_;
};

struct LabeledCorpus {
  std::vector<Document> documents;  // aligned with labels rows
  LabelMatrix labels;

  size_t size() const { return documents.size(); }

  // Documents and label rows must be in bijection.
  void check_aligned() const;
};

// JSON Lines, one document per record:
//   {"id": ..., "fields": {"Title": ..., ...}, "labels": [class_id, ...]}
// class_ids is the column universe; when empty, columns are the union of the
// label sets found in the file.
LabeledCorpus load_corpus(const std::string& path,
                          std::vector<std::string> class_ids = {});
void save_corpus(const LabeledCorpus& corpus, const std::string& path);

struct SampleStats {
  // Classes whose pool had fewer documents than requested, with the shortfall.
  std::vector<std::pair<std::string, size_t>> short_classes;
};

// For each class in `classes` (processed in sorted order) tops the selection
// up to n_per_class documents labeled with it, sampling uniformly without
// replacement. A document already selected through another class counts
// toward the quota. Classes with too few documents contribute everything they
// have and are recorded in stats.
LabeledCorpus stratified_sample(const LabeledCorpus& corpus,
                                const std::vector<std::string>& classes,
                                size_t n_per_class, uint64_t seed,
                                SampleStats* stats = nullptr);

struct SplitResult {
  LabeledCorpus train, valid, test;
};

// Stratified sampling against the remaining pool, in order train -> valid ->
// test; the three corpora are pairwise document-disjoint.
SplitResult split_corpus(const LabeledCorpus& corpus,
                         const std::vector<std::string>& classes,
                         size_t n_train, size_t n_valid, size_t n_test,
                         uint64_t seed, SampleStats* stats = nullptr);

inline SplitResult split_corpus(const LabeledCorpus& corpus,
                                const std::vector<std::string>& classes,
                                size_t n_per_class, uint64_t seed,
                                SampleStats* stats = nullptr) {
  return split_corpus(corpus, classes, n_per_class, n_per_class, n_per_class, seed, stats);
}

// Subset of a corpus by document positions, preserving corpus order.
LabeledCorpus subset_corpus(const LabeledCorpus& corpus, const std::vector<size_t>& keep);

void save_split_manifest(const SplitResult& split, const std::string& path);

}  // namespace ztc
