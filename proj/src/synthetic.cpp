#include "ztc/synthetic.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ztc/errors.hpp"
#include "ztc/rng.hpp"

namespace ztc {

namespace {

constexpr size_t kTopicSize = 6;    // tokens per class topic
constexpr size_t kInherit = 3;      // tokens a child keeps from its parent
constexpr size_t kTitleTokens = 2;
constexpr size_t kEmployerTokens = 2;
constexpr size_t kDescMinTokens = 10;
constexpr size_t kDescMaxTokens = 18;
constexpr size_t kBackgroundCap = 256;

const char* kSyllables[] = {"ba", "ce",  "di",  "fo",  "gu",  "ka",  "le",
                            "mi", "no",  "pu",  "ra",  "se",  "ti",  "vo",
                            "zu", "den", "lor", "mak", "nis", "tur"};
constexpr size_t kNumSyllables = sizeof(kSyllables) / sizeof(kSyllables[0]);

// Unique pseudo-word for each index; three syllables, four when the index
// outgrows the three-syllable space.
std::string make_word(size_t i) {
  size_t syllable_count = 3;
  size_t space = kNumSyllables * kNumSyllables * kNumSyllables;
  size_t offset = 0;
  while (i >= offset + space) {
    offset += space;
    space *= kNumSyllables;
    ++syllable_count;
  }
  size_t v = i - offset;
  std::string w;
  for (size_t s = 0; s < syllable_count; ++s) {
    w += kSyllables[v % kNumSyllables];
    v /= kNumSyllables;
  }
  return w;
}

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

struct ClassTopic {
  std::vector<std::string> tokens;  // inherited first, then fresh
  size_t n_fresh = 0;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_roots < 1 || spec.branching < 1 || spec.docs_per_leaf < 1 || spec.vocab_size < 1) {
    throw ConfigError("generate_synthetic: all counts must be >= 1");
  }
  if (spec.noise_rate < 0.0 || spec.noise_rate >= 1.0) {
    throw ConfigError("generate_synthetic: noise_rate must be in [0, 1)");
  }

  Rng rng(spec.seed);
  Rng topic_rng = rng.sub("topics");
  Rng doc_rng = rng.sub("docs");

  // Lay out the balanced forest breadth-first.
  struct Slot {
    std::string id;
    std::string parent;  // empty for roots
    size_t depth;
  };
  std::vector<Slot> slots;
  for (size_t r = 0; r < spec.n_roots; ++r) {
    slots.push_back({"c" + std::to_string(r), "", 0});
  }
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].depth >= spec.depth) continue;
    for (size_t b = 0; b < spec.branching; ++b) {
      slots.push_back({slots[i].id + "." + std::to_string(b), slots[i].id, slots[i].depth + 1});
    }
  }

  const size_t n_classes = slots.size();
  const size_t fresh_per_child = kTopicSize - kInherit;
  const size_t topic_budget =
      spec.n_roots * kTopicSize + (n_classes - spec.n_roots) * fresh_per_child;
  if (topic_budget >= spec.vocab_size) {
    throw DataError("generate_synthetic: vocabulary exhaustion; " +
                    std::to_string(n_classes) + " classes need " +
                    std::to_string(topic_budget) + " topic tokens but vocab_size is " +
                    std::to_string(spec.vocab_size));
  }
  const size_t background_size = std::min(kBackgroundCap, spec.vocab_size - topic_budget);
  std::vector<std::string> background;
  background.reserve(background_size);
  for (size_t i = 0; i < background_size; ++i) background.push_back(make_word(topic_budget + i));

  // Topic tokens: children inherit a seeded half of the parent topic.
  size_t next_fresh = 0;
  auto take_fresh = [&](size_t n) {
    std::vector<std::string> out;
    for (size_t i = 0; i < n; ++i) out.push_back(make_word(next_fresh++));
    return out;
  };
  std::map<std::string, ClassTopic> topics;
  std::vector<ClassNode> nodes;
  for (const Slot& s : slots) {
    ClassTopic topic;
    if (s.parent.empty()) {
      topic.tokens = take_fresh(kTopicSize);
      topic.n_fresh = kTopicSize;
    } else {
      const auto& parent_tokens = topics.at(s.parent).tokens;
      for (size_t idx : topic_rng.sample_without_replacement(parent_tokens.size(), kInherit)) {
        topic.tokens.push_back(parent_tokens[idx]);
      }
      auto fresh = take_fresh(fresh_per_child);
      topic.n_fresh = fresh.size();
      topic.tokens.insert(topic.tokens.end(), fresh.begin(), fresh.end());
    }

    ClassNode node;
    node.id = s.id;
    if (!s.parent.empty()) node.parent_ids.push_back(s.parent);
    const size_t first_fresh = topic.tokens.size() - topic.n_fresh;
    node.name = capitalize(topic.tokens[first_fresh]);
    if (topic.n_fresh > 1) node.name += " " + capitalize(topic.tokens[first_fresh + 1]);
    node.definition = "Typical work involves";
    for (size_t i = 0; i < topic.tokens.size(); ++i) {
      node.definition += (i == 0 ? " " : ", ") + topic.tokens[i];
    }
    node.definition += ".";
    topics.emplace(s.id, std::move(topic));
    nodes.push_back(std::move(node));
  }

  Taxonomy taxonomy = Taxonomy::from_nodes(std::move(nodes));
  const std::vector<std::string> leaves = taxonomy.leaves();

  // Documents.
  const double second_label_frac = doc_rng.uniform(0.1, 0.3);
  std::vector<Document> docs;
  std::vector<std::string> doc_ids;
  std::vector<std::pair<uint32_t, uint32_t>> label_pairs;
  std::vector<std::string> class_ids;
  for (const auto& n : taxonomy.nodes()) class_ids.push_back(n.id);
  std::unordered_map<std::string, uint32_t> class_pos;
  for (uint32_t i = 0; i < class_ids.size(); ++i) class_pos[class_ids[i]] = i;

  size_t doc_counter = 0;
  auto next_doc_id = [&]() {
    std::string num = std::to_string(doc_counter++);
    return "d" + std::string(6 - std::min<size_t>(6, num.size()), '0') + num;
  };

  for (const auto& leaf : leaves) {
    for (size_t k = 0; k < spec.docs_per_leaf; ++k) {
      std::vector<std::string> labels = {leaf};
      if (doc_rng.bernoulli(second_label_frac)) {
        std::vector<std::string> sib;
        const std::set<std::string> leaf_set(leaves.begin(), leaves.end());
        for (const auto& s : taxonomy.siblings(leaf)) {
          if (leaf_set.count(s)) sib.push_back(s);
        }
        if (!sib.empty()) labels.push_back(sib[doc_rng.index(sib.size())]);
      }

      std::vector<std::string> pool;
      for (const auto& l : labels) {
        const auto& t = topics.at(l).tokens;
        pool.insert(pool.end(), t.begin(), t.end());
      }
      auto draw_token = [&]() -> const std::string& {
        if (!background.empty() && doc_rng.bernoulli(spec.noise_rate)) {
          return background[doc_rng.index(background.size())];
        }
        return pool[doc_rng.index(pool.size())];
      };
      auto draw_text = [&](size_t n, bool capitalize_first) {
        std::string text;
        for (size_t i = 0; i < n; ++i) {
          std::string tok = draw_token();
          if (capitalize_first && i == 0) tok = capitalize(tok);
          text += (i == 0 ? "" : " ") + tok;
        }
        return text;
      };

      Document d;
      d.id = next_doc_id();
      d.fields = {
          {"Title", draw_text(kTitleTokens, true)},
          {"Employer", draw_text(kEmployerTokens, true)},
          {"Description",
           draw_text(kDescMinTokens + doc_rng.index(kDescMaxTokens - kDescMinTokens + 1), false)},
      };
      const uint32_t row = static_cast<uint32_t>(docs.size());
      for (const auto& l : labels) label_pairs.emplace_back(row, class_pos.at(l));
      doc_ids.push_back(d.id);
      docs.push_back(std::move(d));
    }
  }

  SyntheticData out;
  out.taxonomy = std::move(taxonomy);
  out.corpus.documents = std::move(docs);
  out.corpus.labels = LabelMatrix::build(std::move(doc_ids), class_ids, label_pairs);
  out.corpus.check_aligned();
  return out;
}

}  // namespace ztc
