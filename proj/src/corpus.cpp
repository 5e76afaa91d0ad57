#include "ztc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "ztc/errors.hpp"
#include "ztc/rng.hpp"

namespace ztc {

std::string render_document(const Document& d) {
  std::string out;
  for (size_t i = 0; i < d.fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += d.fields[i].first;
    out += ": ";
    out += d.fields[i].second;
  }
  return out;
}

LabelMatrix LabelMatrix::build(std::vector<std::string> doc_ids,
                               std::vector<std::string> class_ids,
                               const std::vector<std::pair<uint32_t, uint32_t>>& pairs) {
  LabelMatrix m;
  std::vector<size_t> order(class_ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return class_ids[a] < class_ids[b]; });
  std::vector<uint32_t> remap(class_ids.size());
  m.class_ids_.resize(class_ids.size());
  for (size_t newpos = 0; newpos < order.size(); ++newpos) {
    remap[order[newpos]] = static_cast<uint32_t>(newpos);
    m.class_ids_[newpos] = class_ids[order[newpos]];
  }
  for (size_t i = 0; i + 1 < m.class_ids_.size(); ++i) {
    if (m.class_ids_[i] == m.class_ids_[i + 1]) {
      throw DataError("labels: duplicate class_id '" + m.class_ids_[i] + "'");
    }
  }
  m.doc_ids_ = std::move(doc_ids);
  m.rows_.assign(m.doc_ids_.size(), {});
  m.cols_.assign(m.class_ids_.size(), {});
  for (auto [d, c] : pairs) {
    if (d >= m.doc_ids_.size() || c >= class_ids.size()) {
      throw DataError("labels: entry index out of range");
    }
    m.rows_[d].push_back(remap[c]);
  }
  for (size_t d = 0; d < m.rows_.size(); ++d) {
    auto& r = m.rows_[d];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    for (uint32_t c : r) m.cols_[c].push_back(static_cast<uint32_t>(d));
  }
  for (size_t i = 0; i < m.doc_ids_.size(); ++i) {
    if (!m.doc_index_.emplace(m.doc_ids_[i], i).second) {
      throw DataError("labels: duplicate doc_id '" + m.doc_ids_[i] + "'");
    }
  }
  for (size_t i = 0; i < m.class_ids_.size(); ++i) m.class_index_[m.class_ids_[i]] = i;
  return m;
}

bool LabelMatrix::has(size_t doc, size_t cls) const {
  const auto& r = rows_[doc];
  return std::binary_search(r.begin(), r.end(), static_cast<uint32_t>(cls));
}

size_t LabelMatrix::doc_index(const std::string& id) const {
  auto it = doc_index_.find(id);
  if (it == doc_index_.end()) throw DataError("labels: unknown doc_id '" + id + "'");
  return it->second;
}

size_t LabelMatrix::class_index(const std::string& id) const {
  auto it = class_index_.find(id);
  if (it == class_index_.end()) throw DataError("labels: unknown class_id '" + id + "'");
  return it->second;
}

void LabeledCorpus::check_aligned() const {
  if (documents.size() != labels.num_docs()) {
    throw DataError("corpus: documents and label rows differ in count");
  }
  for (size_t i = 0; i < documents.size(); ++i) {
    if (documents[i].id != labels.doc_ids()[i]) {
      throw DataError("corpus: document order mismatch at '" + documents[i].id + "'");
    }
  }
}

LabeledCorpus load_corpus(const std::string& path, std::vector<std::string> class_ids) {
  std::ifstream in(path);
  if (!in) throw DataError("corpus: cannot open '" + path + "'");

  std::vector<Document> docs;
  std::vector<std::vector<std::string>> doc_labels;
  std::set<std::string> class_universe(class_ids.begin(), class_ids.end());
  const bool infer_classes = class_ids.empty();

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::ordered_json rec;
    try {
      rec = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus: parse failure at " + path + ":" + std::to_string(lineno) +
                      ": " + e.what());
    }
    Document d;
    try {
      d.id = rec.at("id").get<std::string>();
      for (const auto& [key, value] : rec.at("fields").items()) {
        d.fields.emplace_back(key, value.get<std::string>());
      }
      doc_labels.push_back(rec.at("labels").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus: bad record at " + path + ":" + std::to_string(lineno) +
                      ": " + e.what());
    }
    if (infer_classes) {
      class_universe.insert(doc_labels.back().begin(), doc_labels.back().end());
    }
    docs.push_back(std::move(d));
  }

  std::vector<std::string> classes(class_universe.begin(), class_universe.end());
  std::unordered_map<std::string, uint32_t> cindex;
  for (uint32_t i = 0; i < classes.size(); ++i) cindex[classes[i]] = i;

  std::vector<std::string> doc_ids;
  doc_ids.reserve(docs.size());
  for (const auto& d : docs) doc_ids.push_back(d.id);

  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (size_t i = 0; i < doc_labels.size(); ++i) {
    for (const auto& c : doc_labels[i]) {
      auto it = cindex.find(c);
      if (it == cindex.end()) {
        throw DataError("corpus: document '" + docs[i].id + "' labeled with unknown class '" +
                        c + "'");
      }
      pairs.emplace_back(static_cast<uint32_t>(i), it->second);
    }
  }

  LabeledCorpus corpus;
  corpus.documents = std::move(docs);
  corpus.labels = LabelMatrix::build(std::move(doc_ids), std::move(classes), pairs);
  corpus.check_aligned();
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("corpus: cannot write '" + path + "'");
  for (size_t i = 0; i < corpus.documents.size(); ++i) {
    const Document& d = corpus.documents[i];
    nlohmann::ordered_json rec;
    rec["id"] = d.id;
    nlohmann::ordered_json fields;
    for (const auto& [k, v] : d.fields) fields[k] = v;
    rec["fields"] = std::move(fields);
    std::vector<std::string> labels;
    for (uint32_t c : corpus.labels.labels_of(i)) labels.push_back(corpus.labels.class_ids()[c]);
    rec["labels"] = labels;
    out << rec.dump() << "\n";
  }
}

LabeledCorpus subset_corpus(const LabeledCorpus& corpus, const std::vector<size_t>& keep) {
  LabeledCorpus out;
  std::vector<std::string> doc_ids;
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (size_t newpos = 0; newpos < keep.size(); ++newpos) {
    const size_t old = keep[newpos];
    out.documents.push_back(corpus.documents[old]);
    doc_ids.push_back(corpus.documents[old].id);
    for (uint32_t c : corpus.labels.labels_of(old)) {
      pairs.emplace_back(static_cast<uint32_t>(newpos), c);
    }
  }
  out.labels = LabelMatrix::build(std::move(doc_ids),
                                  corpus.labels.class_ids(), pairs);
  return out;
}

LabeledCorpus stratified_sample(const LabeledCorpus& corpus,
                                const std::vector<std::string>& classes,
                                size_t n_per_class, uint64_t seed,
                                SampleStats* stats) {
  if (n_per_class < 1) throw ConfigError("stratified_sample: n_per_class must be >= 1");
  std::vector<std::string> sorted_classes = classes;
  std::sort(sorted_classes.begin(), sorted_classes.end());
  sorted_classes.erase(std::unique(sorted_classes.begin(), sorted_classes.end()),
                       sorted_classes.end());

  Rng rng(seed);
  std::vector<char> selected(corpus.size(), 0);
  for (const auto& cls : sorted_classes) {
    if (!corpus.labels.has_class(cls)) {
      if (stats) stats->short_classes.emplace_back(cls, n_per_class);
      continue;
    }
    const auto& pool = corpus.labels.docs_of(corpus.labels.class_index(cls));
    size_t have = 0;
    std::vector<uint32_t> unpicked;
    for (uint32_t d : pool) {
      if (selected[d]) {
        ++have;
      } else {
        unpicked.push_back(d);
      }
    }
    if (have >= n_per_class) continue;
    size_t need = n_per_class - have;
    if (need > unpicked.size()) {
      if (stats) stats->short_classes.emplace_back(cls, need - unpicked.size());
      need = unpicked.size();
    }
    for (size_t idx : rng.sample_without_replacement(unpicked.size(), need)) {
      selected[unpicked[idx]] = 1;
    }
  }

  std::vector<size_t> keep;
  for (size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) keep.push_back(i);
  }
  return subset_corpus(corpus, keep);
}

SplitResult split_corpus(const LabeledCorpus& corpus,
                         const std::vector<std::string>& classes,
                         size_t n_train, size_t n_valid, size_t n_test,
                         uint64_t seed, SampleStats* stats) {
  SplitResult out;
  std::set<std::string> taken;

  auto remaining_pool = [&]() {
    std::vector<size_t> keep;
    for (size_t i = 0; i < corpus.size(); ++i) {
      if (!taken.count(corpus.documents[i].id)) keep.push_back(i);
    }
    return subset_corpus(corpus, keep);
  };

  struct Part {
    const char* name;
    size_t n;
    LabeledCorpus* dst;
  };
  const Part parts[] = {{"train", n_train, &out.train},
                        {"valid", n_valid, &out.valid},
                        {"test", n_test, &out.test}};
  for (const Part& p : parts) {
    LabeledCorpus pool = remaining_pool();
    *p.dst = stratified_sample(pool, classes, p.n, Rng::derive_seed(seed, p.name), stats);
    for (const auto& d : p.dst->documents) taken.insert(d.id);
  }
  return out;
}

void save_split_manifest(const SplitResult& split, const std::string& path) {
  nlohmann::json doc;
  auto ids = [](const LabeledCorpus& c) {
    std::vector<std::string> out;
    for (const auto& d : c.documents) out.push_back(d.id);
    return out;
  };
  doc["train"] = ids(split.train);
  doc["valid"] = ids(split.valid);
  doc["test"] = ids(split.test);
  std::ofstream out(path);
  if (!out) throw DataError("split: cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace ztc
