#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "ztc/errors.hpp"
#include "ztc/metrics.hpp"
#include "ztc/synthetic.hpp"
#include "ztc/training.hpp"

using namespace ztc;

namespace {

struct Fixture {
  SyntheticData data;
  SplitResult split;
  Vocabulary vocab;
  std::vector<ClassText> class_texts;

  Fixture() {
    SyntheticSpec spec;
    spec.n_roots = 2;
    spec.depth = 1;
    spec.branching = 3;
    spec.docs_per_leaf = 12;
    spec.vocab_size = 512;
    spec.seed = 42;
    data = generate_synthetic(spec);
    split = split_corpus(data.corpus, data.corpus.labels.class_ids(), 4, 2, 2, 7);
    std::vector<std::string> texts;
    for (const auto& d : split.train.documents) texts.push_back(render_document(d));
    for (const auto& n : data.taxonomy.nodes()) {
      const std::string t = Taxonomy::render_class(n);
      texts.push_back(t);
      class_texts.push_back(ClassText{n.id, t});
    }
    vocab = Vocabulary::build(texts, 4096);
  }

  EncoderConfig boe() const {
    EncoderConfig c;
    c.kind = EncoderKind::bag_of_embeddings;
    c.dim = 16;
    c.max_len = 32;
    c.vocab_size = static_cast<int>(vocab.size());
    return c;
  }

  TrainConfig tc() const {
    TrainConfig t;
    t.epochs = 20;
    t.batch_size = 8;
    t.lr_random = 5e-3;
    t.n_neg_classes = 4;
    t.n_neg_docs = 2;
    t.seed = 3;
    return t;
  }

  // the loop's own validation protocol, replayed against a finished model
  double valid_lrap_of(const BiEncoderModel& m) const {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& id : split.train.labels.class_ids())
      pairs.push_back({id, Taxonomy::render_class(data.taxonomy.node(id))});
    ClassEncodingCache cache = build_class_cache(m, pairs);
    Tensor R(static_cast<int>(split.valid.size()), static_cast<int>(pairs.size()));
    for (size_t i = 0; i < split.valid.size(); ++i) {
      auto row = score_biencoder_cached(m, cache, render_document(split.valid.documents[i]));
      for (size_t j = 0; j < row.size(); ++j)
        R(static_cast<int>(i), static_cast<int>(j)) = row[j];
    }
    return lrap(split.valid.labels, R);
  }
};

}  // namespace

TEST_CASE("bi-encoder training improves validation ranking") {
  Fixture fx;
  TrainLog log;
  BiEncoderModel m = train_biencoder(fx.split.train, fx.split.valid, fx.class_texts, fx.vocab,
                                     fx.boe(), fx.tc(), &log);
  REQUIRE(log.entries.size() == 20);
  for (size_t e = 0; e < log.entries.size(); ++e) {
    CHECK(log.entries[e].epoch == static_cast<int>(e) + 1);
    CHECK(std::isfinite(log.entries[e].mean_loss));
    CHECK(log.entries[e].valid_lrap >= 0.0);
    CHECK(log.entries[e].valid_lrap <= 1.0);
  }
  // learning happened: the best epoch clearly beats the first
  const double first = log.entries.front().valid_lrap;
  double best = 0.0;
  for (const auto& e : log.entries) best = std::max(best, e.valid_lrap);
  CHECK(best > first);
  CHECK(best >= 0.85);

  // loss trends down across the run
  CHECK(log.entries.back().mean_loss < log.entries.front().mean_loss);

  // best_epoch is the earliest argmax of validation LRAP
  int expect_best = 0;
  double expect_lrap = -1.0;
  for (const auto& e : log.entries) {
    if (e.valid_lrap > expect_lrap) {
      expect_lrap = e.valid_lrap;
      expect_best = e.epoch;
    }
  }
  CHECK(log.best_epoch == expect_best);

  // the returned model carries the best epoch's parameters, not the last's
  CHECK(fx.valid_lrap_of(m) == doctest::Approx(expect_lrap).epsilon(1e-12));
}

TEST_CASE("identical seeds reproduce the training log exactly") {
  Fixture fx;
  TrainLog a, b;
  BiEncoderModel ma = train_biencoder(fx.split.train, fx.split.valid, fx.class_texts, fx.vocab,
                                      fx.boe(), fx.tc(), &a);
  BiEncoderModel mb = train_biencoder(fx.split.train, fx.split.valid, fx.class_texts, fx.vocab,
                                      fx.boe(), fx.tc(), &b);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t e = 0; e < a.entries.size(); ++e) {
    CHECK(a.entries[e].mean_loss == b.entries[e].mean_loss);
    CHECK(a.entries[e].valid_lrap == b.entries[e].valid_lrap);
    CHECK(a.entries[e].lr == b.entries[e].lr);
  }
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(ma.doc_encoder.token_embedding.data == mb.doc_encoder.token_embedding.data);

  // a different seed diverges
  TrainConfig other = fx.tc();
  other.seed = 4;
  TrainLog c;
  train_biencoder(fx.split.train, fx.split.valid, fx.class_texts, fx.vocab, fx.boe(), other, &c);
  CHECK(c.entries.front().mean_loss != a.entries.front().mean_loss);
}

TEST_CASE("multi-label training learns the observed classes") {
  Fixture fx;
  TrainConfig tc = fx.tc();
  tc.epochs = 40;
  tc.lr_random = 1e-2;
  TrainLog log;
  MultiLabelModel m =
      train_multilabel(fx.split.train, fx.split.valid, fx.vocab, fx.boe(), tc, &log);
  REQUIRE(log.entries.size() == 40);
  CHECK(m.class_ids == fx.split.train.labels.class_ids());
  double best = 0.0;
  for (const auto& e : log.entries) best = std::max(best, e.valid_lrap);
  CHECK(best > log.entries.front().valid_lrap);
  CHECK(best >= 0.85);
  CHECK(log.entries.back().mean_loss < log.entries.front().mean_loss);
}

TEST_CASE("training rejects malformed inputs") {
  Fixture fx;
  LabeledCorpus empty;
  empty.labels = LabelMatrix::build({}, fx.split.train.labels.class_ids(), {});
  CHECK_THROWS_AS(
      train_multilabel(empty, fx.split.valid, fx.vocab, fx.boe(), fx.tc(), nullptr), DataError);
  CHECK_THROWS_AS(
      train_multilabel(fx.split.train, empty, fx.vocab, fx.boe(), fx.tc(), nullptr), DataError);

  // class universes must agree between train and valid
  LabeledCorpus shifted = fx.split.valid;
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (size_t i = 0; i < shifted.size(); ++i)
    for (uint32_t c : shifted.labels.labels_of(i)) pairs.push_back({static_cast<uint32_t>(i), c});
  auto ids = shifted.labels.class_ids();
  ids.push_back("zz_extra");
  shifted.labels = LabelMatrix::build(shifted.labels.doc_ids(), ids, pairs);
  CHECK_THROWS_AS(
      train_multilabel(fx.split.train, shifted, fx.vocab, fx.boe(), fx.tc(), nullptr), DataError);

  // a class without rendered text cannot be trained against
  std::vector<ClassText> missing(fx.class_texts.begin(), fx.class_texts.end() - 1);
  missing.erase(missing.begin());
  CHECK_THROWS_AS(train_biencoder(fx.split.train, fx.split.valid, missing, fx.vocab, fx.boe(),
                                  fx.tc(), nullptr),
                  DataError);
}

TEST_CASE("train log serializes one record per epoch") {
  TrainLog log;
  log.entries = {{1, 2.5, 0.25, 0.001}, {2, 1.25, 0.5, 0.0005}};
  log.best_epoch = 2;
  const std::string path = "/tmp/ztc_test_trainlog.jsonl";
  log.save_jsonl(path);
  std::ifstream in(path);
  std::string line;
  std::vector<nlohmann::json> recs;
  while (std::getline(in, line)) recs.push_back(nlohmann::json::parse(line));
  REQUIRE(recs.size() == 2);
  CHECK(recs[0]["epoch"] == 1);
  CHECK(recs[0]["mean_loss"] == 2.5);
  CHECK(recs[1]["valid_lrap"] == 0.5);
  CHECK(recs[1]["lr"] == 0.0005);
  std::remove(path.c_str());
}
