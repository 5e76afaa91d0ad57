#include "ztc/metrics.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "ztc/errors.hpp"

namespace ztc {

namespace {

// items are (score, positive) pairs; reordered in place. Walks tie groups in
// descending score order so every positive i sees |{k: r_k ≥ r_i}| as the
// running prefix including its whole group.
double tie_aware_ap(std::vector<std::pair<double, int>>& items) {
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double sum = 0.0;
  size_t above = 0, pos_above = 0, total_pos = 0;
  size_t i = 0;
  while (i < items.size()) {
    size_t j = i;
    size_t group_pos = 0;
    while (j < items.size() && items[j].first == items[i].first) group_pos += items[j++].second;
    const size_t group = j - i;
    if (group_pos > 0) {
      sum += static_cast<double>(group_pos) * static_cast<double>(pos_above + group_pos) /
             static_cast<double>(above + group);
    }
    above += group;
    pos_above += group_pos;
    total_pos += group_pos;
    i = j;
  }
  if (total_pos == 0) throw DataError("average_precision: no positive labels");
  return sum / static_cast<double>(total_pos);
}

}  // namespace

double average_precision(const std::vector<int>& y, const std::vector<double>& r) {
  if (y.size() != r.size()) throw DataError("average_precision: length mismatch");
  std::vector<std::pair<double, int>> items(y.size());
  for (size_t i = 0; i < y.size(); ++i) items[i] = {r[i], y[i] != 0};
  return tie_aware_ap(items);
}

static void check_shapes(const LabelMatrix& Y, const Tensor& R) {
  if (static_cast<size_t>(R.rows) != Y.num_docs() ||
      static_cast<size_t>(R.cols) != Y.num_classes()) {
    throw DataError("metrics: score matrix shape does not match label matrix");
  }
}

double lrap(const LabelMatrix& Y, const Tensor& R) {
  check_shapes(Y, R);
  double sum = 0.0;
  size_t scored = 0;
  std::vector<std::pair<double, int>> items;
  for (size_t d = 0; d < Y.num_docs(); ++d) {
    const auto& pos = Y.labels_of(d);
    if (pos.empty()) continue;
    items.assign(Y.num_classes(), {0.0, 0});
    for (size_t c = 0; c < Y.num_classes(); ++c) items[c] = {R(d, c), 0};
    for (uint32_t c : pos) items[c].second = 1;
    sum += tie_aware_ap(items);
    ++scored;
  }
  if (scored == 0) throw DataError("lrap: no scorable rows");
  return sum / static_cast<double>(scored);
}

double macro_ap(const LabelMatrix& Y, const Tensor& R) {
  check_shapes(Y, R);
  double sum = 0.0;
  size_t scored = 0;
  std::vector<std::pair<double, int>> items;
  for (size_t c = 0; c < Y.num_classes(); ++c) {
    const auto& pos = Y.docs_of(c);
    if (pos.empty()) continue;
    items.assign(Y.num_docs(), {0.0, 0});
    for (size_t d = 0; d < Y.num_docs(); ++d) items[d] = {R(d, c), 0};
    for (uint32_t d : pos) items[d].second = 1;
    sum += tie_aware_ap(items);
    ++scored;
  }
  if (scored == 0) throw DataError("macro_ap: no scorable columns");
  return sum / static_cast<double>(scored);
}

EvalReport evaluate(const LabelMatrix& Y, const Tensor& R) {
  check_shapes(Y, R);
  EvalReport rep;
  std::vector<std::pair<double, int>> items;

  double doc_sum = 0.0;
  size_t doc_n = 0;
  for (size_t d = 0; d < Y.num_docs(); ++d) {
    const auto& pos = Y.labels_of(d);
    if (pos.empty()) {
      rep.skipped_docs.push_back(Y.doc_ids()[d]);
      continue;
    }
    items.assign(Y.num_classes(), {0.0, 0});
    for (size_t c = 0; c < Y.num_classes(); ++c) items[c] = {R(d, c), 0};
    for (uint32_t c : pos) items[c].second = 1;
    double ap = tie_aware_ap(items);
    rep.per_doc_ap[Y.doc_ids()[d]] = ap;
    doc_sum += ap;
    ++doc_n;
  }

  double cls_sum = 0.0;
  size_t cls_n = 0;
  for (size_t c = 0; c < Y.num_classes(); ++c) {
    const auto& pos = Y.docs_of(c);
    rep.class_positives[Y.class_ids()[c]] = pos.size();
    if (pos.empty()) {
      rep.skipped_classes.push_back(Y.class_ids()[c]);
      continue;
    }
    items.assign(Y.num_docs(), {0.0, 0});
    for (size_t d = 0; d < Y.num_docs(); ++d) items[d] = {R(d, c), 0};
    for (uint32_t d : pos) items[d].second = 1;
    double ap = tie_aware_ap(items);
    rep.per_class_ap[Y.class_ids()[c]] = ap;
    cls_sum += ap;
    ++cls_n;
  }

  if (doc_n == 0) throw DataError("evaluate: no scorable rows");
  if (cls_n == 0) throw DataError("evaluate: no scorable columns");
  rep.lrap = doc_sum / static_cast<double>(doc_n);
  rep.macro_ap = cls_sum / static_cast<double>(cls_n);
  std::sort(rep.skipped_docs.begin(), rep.skipped_docs.end());
  std::sort(rep.skipped_classes.begin(), rep.skipped_classes.end());
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["lrap"] = lrap;
  doc["macro_ap"] = macro_ap;
  doc["per_class_ap"] = per_class_ap;
  doc["per_doc_ap"] = per_doc_ap;
  doc["skipped_classes"] = skipped_classes;
  doc["skipped_docs"] = skipped_docs;
  return doc.dump(2);
}

void EvalReport::save_json(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("metrics: cannot write '" + path + "'");
  out << to_json() << "\n";
}

void EvalReport::save_class_ap_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("metrics: cannot write '" + path + "'");
  out << "class_id,ap,n_positives\n";
  char buf[64];
  for (const auto& [id, ap] : per_class_ap) {
    std::snprintf(buf, sizeof(buf), "%.17g", ap);
    out << id << "," << buf << "," << class_positives.at(id) << "\n";
  }
}

}  // namespace ztc
