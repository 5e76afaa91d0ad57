#pragma once

#include <cstdint>
#include <string>

#include "ztc/corpus.hpp"
#include "ztc/taxonomy.hpp"

namespace ztc {

// Seeded synthetic benchmark generator. Builds a balanced forest of classes,
// assigns each class a topic token set (children inherit half of the parent's
// tokens and add fresh ones), and emits documents whose tokens come from
// their labels' topics with probability 1 - noise_rate and from a shared
// background vocabulary otherwise. Some documents (a seeded 10-30% draw) get
// a second label from a sibling leaf.
struct SyntheticSpec {
  size_t n_roots = 2;
  size_t depth = 2;      // root is depth 0; leaves sit at this depth
  size_t branching = 4;
  size_t vocab_size = 8192;  // budget for topic + background tokens
  size_t docs_per_leaf = 30;
  double noise_rate = 0.0;
  uint64_t seed = 0;
};

struct SyntheticData {
  Taxonomy taxonomy;
  LabeledCorpus corpus;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace ztc
