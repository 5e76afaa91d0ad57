#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ztc/corpus.hpp"
#include "ztc/taxonomy.hpp"

namespace ztc {

enum class ExpansionOp { refine, extend };

std::string to_string(ExpansionOp op);
ExpansionOp expansion_op_from_string(const std::string& s);

struct ExpansionSpec {
  ExpansionOp operation = ExpansionOp::refine;
  double target_fraction = 0.5;  // in (0, 1]
  uint64_t seed = 0;
};

// Maps the simulated pre-expansion (source) taxonomy back to the full
// (target) taxonomy. class_map sends each hidden class to its training-time
// replacement: the parent for refine, nothing (removed) for extend.
struct ExpansionResult {
  ExpansionOp operation = ExpansionOp::refine;
  uint64_t seed = 0;
  double target_fraction = 0.0;
  std::vector<std::string> hidden;    // sorted
  std::vector<std::string> observed;  // sorted
  std::map<std::string, std::optional<std::string>> class_map;
  double coverage = 1.0;

  bool is_hidden(const std::string& id) const;

  std::string to_json() const;
  static ExpansionResult from_json(const std::string& text);
  void save(const std::string& path) const;
  static ExpansionResult load(const std::string& path);
};

// |observed| / (|observed| + |hidden|); 1 when nothing is hidden, 0 when
// nothing is observed. Callers pass leaf counts for refine and class counts
// for extend.
double coverage_fraction(size_t n_observed, size_t n_hidden);

struct ExpansionOutput {
  ExpansionResult result;
  LabeledCorpus relabeled;  // training corpus over the source taxonomy
};

// Repeatedly draws a random not-yet-hidden leaf and hides it together with
// its leaf siblings, until the hidden fraction of leaves reaches
// target_fraction. Each hidden class is replaced by its (lexicographically
// smallest) parent in every training label set; documents are never dropped.
// Leaves without parents (isolated nodes) cannot be refined away and stay
// observed; if only such leaves remain the procedure stops short of the
// target.
ExpansionOutput refine(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec);

// Repeatedly draws a random surviving root and hides it with all its
// descendants, until the hidden fraction of all classes reaches
// target_fraction. Hidden labels are removed from training label sets and
// documents left with no labels are dropped.
ExpansionOutput extend(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec);

ExpansionOutput expand(const Taxonomy& t, const LabeledCorpus& train, const ExpansionSpec& spec);

// No-op expansion: everything observed. Used for coverage = 1 runs.
ExpansionOutput identity_expansion(const Taxonomy& t, const LabeledCorpus& train,
                                   ExpansionOp op, uint64_t seed);

// Applies an expansion's class_map to another corpus (e.g. the validation
// split): refine substitutes replacements and deduplicates, extend removes
// hidden labels and drops emptied documents.
LabeledCorpus apply_class_map(const LabeledCorpus& corpus, const ExpansionResult& result);

}  // namespace ztc
