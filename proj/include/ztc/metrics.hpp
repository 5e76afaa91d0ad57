#pragma once

#include <map>
#include <string>
#include <vector>

#include "ztc/corpus.hpp"
#include "ztc/tensor.hpp"

namespace ztc {

// Tie-aware average precision:
//   AP(y, r) = (1/Σy) · Σ_{i: y_i=1} |{k: y_k=1 ∧ r_k ≥ r_i}| / |{k: r_k ≥ r_i}|
// Ties are resolved by the ≥ comparisons themselves, not by permutation
// averaging. Throws DataError when y has no positives.
double average_precision(const std::vector<int>& y, const std::vector<double>& r);

// Mean row-wise AP over documents with at least one positive label.
// R is docs x classes, aligned with Y. Throws DataError if no row is scorable.
double lrap(const LabelMatrix& Y, const Tensor& R);

// Mean column-wise AP over classes with at least one positive document.
double macro_ap(const LabelMatrix& Y, const Tensor& R);

struct EvalReport {
  double lrap = 0.0;
  double macro_ap = 0.0;
  std::map<std::string, double> per_class_ap;
  std::map<std::string, double> per_doc_ap;
  std::map<std::string, size_t> class_positives;
  std::vector<std::string> skipped_classes;  // all-zero ground-truth columns
  std::vector<std::string> skipped_docs;     // all-zero ground-truth rows

  std::string to_json() const;
  void save_json(const std::string& path) const;
  // class_id, ap, n_positives; scored classes only, sorted by id.
  void save_class_ap_csv(const std::string& path) const;
};

EvalReport evaluate(const LabelMatrix& Y, const Tensor& R);

}  // namespace ztc
