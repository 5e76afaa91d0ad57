#include "ztc/expansion.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "ztc/errors.hpp"
#include "ztc/rng.hpp"

namespace ztc {

std::string to_string(ExpansionOp op) {
  return op == ExpansionOp::refine ? "refine" : "extend";
}

ExpansionOp expansion_op_from_string(const std::string& s) {
  if (s == "refine") return ExpansionOp::refine;
  if (s == "extend") return ExpansionOp::extend;
  throw ConfigError("expansion: unknown operation '" + s + "'");
}

bool ExpansionResult::is_hidden(const std::string& id) const {
  return std::binary_search(hidden.begin(), hidden.end(), id);
}

double coverage_fraction(size_t n_observed, size_t n_hidden) {
  if (n_hidden == 0) return 1.0;
  if (n_observed == 0) return 0.0;
  return static_cast<double>(n_observed) / static_cast<double>(n_observed + n_hidden);
}

namespace {

void check_spec(const Taxonomy& t, const ExpansionSpec& spec) {
  if (t.empty()) throw DataError("expansion: empty taxonomy");
  if (!(spec.target_fraction > 0.0 && spec.target_fraction <= 1.0)) {
    throw ConfigError("expansion: target_fraction must be in (0, 1]");
  }
}

void check_labels(const Taxonomy& t, const LabeledCorpus& train) {
  for (const auto& c : train.labels.class_ids()) {
    if (!t.contains(c)) {
      throw DataError("expansion: training label class '" + c + "' is not in the taxonomy");
    }
  }
}

// Rebuilds the training corpus against the observed class set, substituting
// hidden classes per class_map. Replacements are resolved transitively: a
// hidden non-leaf sibling's parent may itself have been hidden by a later
// draw. Documents whose label sets empty out are dropped (extend only).
LabeledCorpus relabel(const LabeledCorpus& corpus, const ExpansionResult& result) {
  const auto& old = corpus.labels;
  std::vector<std::string> new_classes = result.observed;
  std::unordered_map<std::string, uint32_t> cindex;
  for (uint32_t i = 0; i < new_classes.size(); ++i) cindex[new_classes[i]] = i;

  auto resolve = [&](const std::string& id) -> std::optional<std::string> {
    std::string cur = id;
    while (true) {
      auto it = result.class_map.find(cur);
      if (it == result.class_map.end()) return cur;
      if (!it->second.has_value()) return std::nullopt;
      cur = *it->second;  // replacement chains ascend the DAG, so this ends
    }
  };

  std::vector<Document> docs;
  std::vector<std::string> doc_ids;
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (size_t d = 0; d < corpus.size(); ++d) {
    std::set<uint32_t> mapped;
    for (uint32_t c : old.labels_of(d)) {
      if (auto target = resolve(old.class_ids()[c])) mapped.insert(cindex.at(*target));
    }
    if (mapped.empty()) continue;
    const uint32_t row = static_cast<uint32_t>(docs.size());
    for (uint32_t c : mapped) pairs.emplace_back(row, c);
    docs.push_back(corpus.documents[d]);
    doc_ids.push_back(corpus.documents[d].id);
  }

  LabeledCorpus out;
  out.documents = std::move(docs);
  out.labels = LabelMatrix::build(std::move(doc_ids), std::move(new_classes), pairs);
  return out;
}

ExpansionResult finish_result(const Taxonomy& t, const ExpansionSpec& spec,
                              const std::set<std::string>& hidden,
                              std::map<std::string, std::optional<std::string>> class_map) {
  ExpansionResult r;
  r.operation = spec.operation;
  r.seed = spec.seed;
  r.target_fraction = spec.target_fraction;
  r.hidden.assign(hidden.begin(), hidden.end());
  for (const auto& n : t.nodes()) {
    if (!hidden.count(n.id)) r.observed.push_back(n.id);
  }
  r.class_map = std::move(class_map);
  if (spec.operation == ExpansionOp::refine) {
    size_t hidden_leaves = 0, observed_leaves = 0;
    for (const auto& leaf : t.leaves()) {
      (hidden.count(leaf) ? hidden_leaves : observed_leaves)++;
    }
    r.coverage = coverage_fraction(observed_leaves, hidden_leaves);
  } else {
    r.coverage = coverage_fraction(r.observed.size(), r.hidden.size());
  }
  return r;
}

}  // namespace

ExpansionOutput refine(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec) {
  check_spec(t, spec);
  check_labels(t, train);

  const std::vector<std::string> leaves = t.leaves();
  const std::set<std::string> leaf_set(leaves.begin(), leaves.end());
  // Only leaves with a parent can be replaced.
  std::vector<std::string> eligible;
  for (const auto& l : leaves) {
    if (!t.node(l).parent_ids.empty()) eligible.push_back(l);
  }

  Rng rng(spec.seed);
  std::set<std::string> hidden;
  std::map<std::string, std::optional<std::string>> class_map;
  size_t hidden_leaves = 0;
  const double total_leaves = static_cast<double>(leaves.size());

  auto hide = [&](const std::string& id) {
    if (!hidden.insert(id).second) return;
    class_map[id] = t.node(id).parent_ids.front();  // sorted; smallest parent
    if (leaf_set.count(id)) ++hidden_leaves;
    eligible.erase(std::remove(eligible.begin(), eligible.end(), id), eligible.end());
  };

  while (static_cast<double>(hidden_leaves) / total_leaves < spec.target_fraction &&
         !eligible.empty()) {
    const std::string drawn = eligible[rng.index(eligible.size())];
    hide(drawn);
    for (const auto& sib : t.siblings(drawn)) {
      if (!t.node(sib).parent_ids.empty()) hide(sib);
    }
  }

  ExpansionOutput out;
  out.result = finish_result(t, spec, hidden, std::move(class_map));
  out.relabeled = relabel(train, out.result);
  return out;
}

ExpansionOutput extend(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec) {
  check_spec(t, spec);
  check_labels(t, train);

  std::vector<std::string> surviving_roots = t.roots();
  Rng rng(spec.seed);
  std::set<std::string> hidden;
  std::map<std::string, std::optional<std::string>> class_map;
  const double total = static_cast<double>(t.size());

  while (static_cast<double>(hidden.size()) / total < spec.target_fraction &&
         !surviving_roots.empty()) {
    const size_t pick = rng.index(surviving_roots.size());
    const std::string root = surviving_roots[pick];
    surviving_roots.erase(surviving_roots.begin() + pick);
    std::vector<std::string> group = t.descendants(root);
    group.push_back(root);
    for (const auto& id : group) {
      if (hidden.insert(id).second) class_map[id] = std::nullopt;
    }
  }

  ExpansionOutput out;
  out.result = finish_result(t, spec, hidden, std::move(class_map));
  out.relabeled = relabel(train, out.result);
  return out;
}

ExpansionOutput expand(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec) {
  return spec.operation == ExpansionOp::refine ? refine(t, train, spec)
                                               : extend(t, train, spec);
}

ExpansionOutput identity_expansion(const Taxonomy& t, const LabeledCorpus& train,
                                   ExpansionOp op, uint64_t seed) {
  check_labels(t, train);
  ExpansionOutput out;
  out.result.operation = op;
  out.result.seed = seed;
  out.result.target_fraction = 0.0;
  for (const auto& n : t.nodes()) out.result.observed.push_back(n.id);
  out.result.coverage = 1.0;
  out.relabeled = relabel(train, out.result);
  return out;
}

LabeledCorpus apply_class_map(const LabeledCorpus& corpus, const ExpansionResult& result) {
  return relabel(corpus, result);
}

std::string ExpansionResult::to_json() const {
  nlohmann::json doc;
  doc["operation"] = to_string(operation);
  doc["seed"] = seed;
  doc["target_fraction"] = target_fraction;
  doc["hidden"] = hidden;
  nlohmann::json map = nlohmann::json::object();
  for (const auto& [k, v] : class_map) {
    if (v.has_value()) {
      map[k] = *v;
    } else {
      map[k] = nullptr;
    }
  }
  doc["class_map"] = std::move(map);
  doc["coverage"] = coverage;
  doc["observed"] = observed;
  return doc.dump(2);
}

ExpansionResult ExpansionResult::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("expansion: parse failure: ") + e.what());
  }
  ExpansionResult r;
  r.operation = expansion_op_from_string(doc.at("operation").get<std::string>());
  r.seed = doc.at("seed").get<uint64_t>();
  r.target_fraction = doc.at("target_fraction").get<double>();
  r.hidden = doc.at("hidden").get<std::vector<std::string>>();
  for (const auto& [k, v] : doc.at("class_map").items()) {
    r.class_map[k] = v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>());
  }
  r.coverage = doc.at("coverage").get<double>();
  r.observed = doc.at("observed").get<std::vector<std::string>>();
  std::sort(r.hidden.begin(), r.hidden.end());
  std::sort(r.observed.begin(), r.observed.end());
  return r;
}

void ExpansionResult::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("expansion: cannot write '" + path + "'");
  out << to_json() << "\n";
}

ExpansionResult ExpansionResult::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("expansion: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace ztc
