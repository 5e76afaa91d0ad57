// ztc: zero-shot taxonomy classification toolkit.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "ztc/errors.hpp"
#include "ztc/experiment.hpp"
#include "ztc/metrics.hpp"
#include "ztc/tfidf.hpp"

using namespace ztc;

namespace {

std::vector<std::string> taxonomy_ids(const Taxonomy& t) {
  std::vector<std::string> ids;
  ids.reserve(t.size());
  for (const auto& n : t.nodes()) ids.push_back(n.id);
  return ids;
}

std::vector<std::pair<std::string, std::string>> class_texts_for(
    const Taxonomy& t, const std::vector<std::string>& ids) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.emplace_back(id, Taxonomy::render_class(t.node(id)));
  return out;
}

std::vector<std::string> rendered_docs(const LabeledCorpus& c) {
  std::vector<std::string> out;
  out.reserve(c.size());
  for (const auto& d : c.documents) out.push_back(render_document(d));
  return out;
}

struct SynthArgs {
  SyntheticSpec spec;
  std::string taxonomy_out = "taxonomy.json";
  std::string corpus_out = "corpus.jsonl";
};

struct SplitArgs {
  std::string taxonomy, corpus, out_prefix;
  size_t n_train = 3, n_valid = 1, n_test = 2;
  uint64_t seed = 0;
};

struct ExpandArgs {
  std::string taxonomy, corpus;
  std::string operation = "refine";
  double target_fraction = 0.5;
  uint64_t seed = 0;
  std::string expansion_out = "expansion.json";
  std::string relabeled_out = "relabeled.jsonl";
};

struct TrainArgs {
  std::string model;
  std::string taxonomy, train, valid;
  std::string expansion;  // optional: observed-class universe + valid relabeling
  std::string out = "model.ckpt";
  std::string log;
  bool tied = false;
  EncoderConfig encoder;
  TrainConfig train_config;
};

struct EvalArgs {
  std::string model;
  std::string checkpoint;  // unused for tfidf
  std::string fit;         // tfidf only: corpus the idf table is fit on
  std::string taxonomy, corpus;
  std::string out = "eval.json";
  std::string csv, scores_csv, scores_bin;
};

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
};

struct SweepArgs {
  std::string bi, cross;
  std::string taxonomy, corpus;
  std::vector<int> k_values;
  std::string out = "sweep.csv";
};

struct ReportArgs {
  std::string run_dir;
};

void do_synth(const SynthArgs& a) {
  cmd_synth(a.spec, a.taxonomy_out, a.corpus_out);
  std::cout << a.taxonomy_out << "\n" << a.corpus_out << "\n";
}

void do_split(const SplitArgs& a) {
  Taxonomy tax = Taxonomy::load(a.taxonomy);
  const auto ids = taxonomy_ids(tax);
  LabeledCorpus corpus = load_corpus(a.corpus, ids);
  SplitResult split = split_corpus(corpus, ids, a.n_train, a.n_valid, a.n_test, a.seed);
  save_corpus(split.train, a.out_prefix + "-train.jsonl");
  save_corpus(split.valid, a.out_prefix + "-valid.jsonl");
  save_corpus(split.test, a.out_prefix + "-test.jsonl");
  save_split_manifest(split, a.out_prefix + "-manifest.json");
  std::cout << a.out_prefix << "-{train,valid,test}.jsonl\n";
}

void do_expand(const ExpandArgs& a) {
  Taxonomy tax = Taxonomy::load(a.taxonomy);
  LabeledCorpus corpus = load_corpus(a.corpus, taxonomy_ids(tax));
  ExpansionSpec spec{expansion_op_from_string(a.operation), a.target_fraction, a.seed};
  ExpansionOutput out = expand(tax, corpus, spec);
  out.result.save(a.expansion_out);
  save_corpus(out.relabeled, a.relabeled_out);
  std::cout << "coverage " << out.result.coverage << ", hidden " << out.result.hidden.size()
            << "\n";
}

void do_train(const TrainArgs& a) {
  const ModelKind kind = model_kind_from_string(a.model);
  if (kind == ModelKind::tfidf)
    throw ConfigError("train: tfidf has no trainable parameters; use eval --fit");

  Taxonomy tax = Taxonomy::load(a.taxonomy);
  const auto all_ids = taxonomy_ids(tax);

  std::vector<std::string> universe = all_ids;
  std::optional<ExpansionResult> exp;
  if (!a.expansion.empty()) {
    exp = ExpansionResult::load(a.expansion);
    universe = exp->observed;
  }
  LabeledCorpus train = load_corpus(a.train, universe);
  LabeledCorpus valid = load_corpus(a.valid, all_ids);
  if (exp) valid = apply_class_map(valid, *exp);

  std::vector<ClassText> classes;
  for (const auto& id : universe) classes.push_back({id, Taxonomy::render_class(tax.node(id))});

  std::vector<std::string> vocab_texts = rendered_docs(train);
  for (const auto& c : classes) vocab_texts.push_back(c.text);
  Vocabulary vocab = Vocabulary::build(vocab_texts, a.encoder.vocab_size);

  TrainLog log;
  if (kind == ModelKind::multi_label) {
    auto m = train_multilabel(train, valid, vocab, a.encoder, a.train_config, &log);
    save_multilabel(m, a.out);
  } else if (kind == ModelKind::bi_encoder) {
    auto m = train_biencoder(train, valid, classes, vocab, a.encoder, a.train_config, &log,
                             a.tied);
    save_biencoder(m, a.out);
  } else {
    auto m = train_crossencoder(train, valid, classes, vocab, a.encoder, a.train_config, &log);
    save_crossencoder(m, a.out);
  }
  if (!a.log.empty()) log.save_jsonl(a.log);
  std::cout << a.out << " (best epoch " << log.best_epoch << ")\n";
}

void do_eval(const EvalArgs& a) {
  const ModelKind kind = model_kind_from_string(a.model);
  Taxonomy tax = Taxonomy::load(a.taxonomy);
  const auto ids = taxonomy_ids(tax);
  LabeledCorpus test = load_corpus(a.corpus, ids);
  const auto texts = rendered_docs(test);
  const auto classes = class_texts_for(tax, ids);

  Tensor R(static_cast<int>(test.size()), static_cast<int>(ids.size()));
  if (kind == ModelKind::multi_label) {
    if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint required");
    auto m = load_multilabel(a.checkpoint);
    std::unordered_map<std::string, size_t> col;
    for (size_t j = 0; j < ids.size(); ++j) col[ids[j]] = j;
    for (size_t i = 0; i < texts.size(); ++i) {
      auto row = score_multilabel(m, texts[i]);
      for (size_t j = 0; j < m.class_ids.size(); ++j) {
        auto it = col.find(m.class_ids[j]);
        if (it == col.end())
          throw DataError("eval: checkpoint class '" + m.class_ids[j] + "' not in taxonomy");
        R(static_cast<int>(i), static_cast<int>(it->second)) = probability(row[j]);
      }
    }
  } else if (kind == ModelKind::bi_encoder) {
    if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint required");
    auto m = load_biencoder(a.checkpoint);
    auto cache = build_class_cache(m, classes);
    for (size_t i = 0; i < texts.size(); ++i) {
      auto row = score_biencoder_cached(m, cache, texts[i]);
      for (size_t j = 0; j < row.size(); ++j) R(static_cast<int>(i), static_cast<int>(j)) = row[j];
    }
  } else if (kind == ModelKind::cross_encoder) {
    if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint required");
    auto m = load_crossencoder(a.checkpoint);
    for (size_t i = 0; i < texts.size(); ++i)
      for (size_t j = 0; j < ids.size(); ++j)
        R(static_cast<int>(i), static_cast<int>(j)) =
            score_crossencoder(m, texts[i], classes[j].second);
  } else {
    if (a.fit.empty()) throw ConfigError("eval: tfidf needs --fit <corpus>");
    LabeledCorpus fit_corpus = load_corpus(a.fit);
    auto model = tfidf_fit(rendered_docs(fit_corpus));
    for (size_t i = 0; i < texts.size(); ++i)
      for (size_t j = 0; j < ids.size(); ++j)
        R(static_cast<int>(i), static_cast<int>(j)) =
            tfidf_score(model, texts[i], classes[j].second);
  }

  EvalReport rep = evaluate(test.labels, R);
  rep.save_json(a.out);
  if (!a.csv.empty()) rep.save_class_ap_csv(a.csv);
  if (!a.scores_csv.empty() || !a.scores_bin.empty()) {
    ScoreMatrix sm{test.labels.doc_ids(), ids, R};
    if (!a.scores_csv.empty()) sm.save_csv(a.scores_csv);
    if (!a.scores_bin.empty()) sm.save_binary(a.scores_bin);
  }
  std::printf("lrap %.6f macro_ap %.6f\n", rep.lrap, rep.macro_ap);
}

void do_run(const RunArgs& a) {
  ExperimentConfig cfg = load_config_with_overrides(a.config, a.sets);
  std::cout << cmd_run(cfg) << "\n";
}

void do_sweep(const SweepArgs& a) {
  Taxonomy tax = Taxonomy::load(a.taxonomy);
  const auto ids = taxonomy_ids(tax);
  LabeledCorpus test = load_corpus(a.corpus, ids);
  auto bi = load_biencoder(a.bi);
  auto cross = load_crossencoder(a.cross);
  SweepTable table = sweep_candidates(bi, cross, test, class_texts_for(tax, ids), a.k_values);
  table.save_csv(a.out);
  std::printf("bi lrap %.6f, cross lrap %.6f, %zu sweep rows -> %s\n", table.bi_lrap,
              table.cross_lrap, table.rows.size(), a.out.c_str());
}

void do_report(const ReportArgs& a) {
  cmd_report(a.run_dir);
  std::cout << a.run_dir << "/tables/model_coverage.csv\n"
            << a.run_dir << "/tables/root_rollup.csv\n";
}

void add_encoder_flags(CLI::App* sub, EncoderConfig* e, std::string* kind_name) {
  sub->add_option("--encoder", *kind_name, "bag-of-embeddings | tiny-transformer")
      ->default_val("bag-of-embeddings");
  sub->add_option("--dim", e->dim, "encoding width");
  sub->add_option("--max-len", e->max_len, "token truncation length");
  sub->add_option("--vocab-size", e->vocab_size, "vocabulary cap");
  sub->add_option("--layers", e->layers, "transformer layers");
  sub->add_option("--heads", e->heads, "attention heads");
  sub->add_option("--ffn", e->ffn, "feed-forward width");
}

void add_train_flags(CLI::App* sub, TrainConfig* t) {
  sub->add_option("--epochs", t->epochs);
  sub->add_option("--batch-size", t->batch_size);
  sub->add_option("--lr-random", t->lr_random);
  sub->add_option("--lr-pretrained", t->lr_pretrained);
  sub->add_option("--warmup", t->warmup_fraction);
  sub->add_option("--clip", t->max_grad_norm);
  sub->add_option("--neg-classes", t->n_neg_classes);
  sub->add_option("--neg-docs", t->n_neg_docs);
  sub->add_option("--seed", t->seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot taxonomy classification toolkit"};
  app.require_subcommand(1);

  auto synth = std::make_shared<SynthArgs>();
  {
    auto* sub = app.add_subcommand("synth", "generate the synthetic benchmark");
    sub->add_option("--n-roots", synth->spec.n_roots);
    sub->add_option("--depth", synth->spec.depth);
    sub->add_option("--branching", synth->spec.branching);
    sub->add_option("--vocab-size", synth->spec.vocab_size);
    sub->add_option("--docs-per-leaf", synth->spec.docs_per_leaf);
    sub->add_option("--noise-rate", synth->spec.noise_rate);
    sub->add_option("--seed", synth->spec.seed);
    sub->add_option("--taxonomy-out", synth->taxonomy_out);
    sub->add_option("--corpus-out", synth->corpus_out);
    sub->callback([synth] { do_synth(*synth); });
  }

  auto split = std::make_shared<SplitArgs>();
  {
    auto* sub = app.add_subcommand("split", "stratified train/valid/test split");
    sub->add_option("--taxonomy", split->taxonomy)->required();
    sub->add_option("--corpus", split->corpus)->required();
    sub->add_option("--out-prefix", split->out_prefix)->required();
    sub->add_option("--n-train", split->n_train);
    sub->add_option("--n-valid", split->n_valid);
    sub->add_option("--n-test", split->n_test);
    sub->add_option("--seed", split->seed);
    sub->callback([split] { do_split(*split); });
  }

  auto expand_args = std::make_shared<ExpandArgs>();
  {
    auto* sub = app.add_subcommand("expand", "simulate taxonomy expansion on a training split");
    sub->add_option("--taxonomy", expand_args->taxonomy)->required();
    sub->add_option("--corpus", expand_args->corpus)->required();
    sub->add_option("--operation", expand_args->operation, "refine | extend");
    sub->add_option("--target-fraction", expand_args->target_fraction);
    sub->add_option("--seed", expand_args->seed);
    sub->add_option("--expansion-out", expand_args->expansion_out);
    sub->add_option("--relabeled-out", expand_args->relabeled_out);
    sub->callback([expand_args] { do_expand(*expand_args); });
  }

  auto train = std::make_shared<TrainArgs>();
  std::string train_encoder_kind = "bag-of-embeddings";
  {
    auto* sub = app.add_subcommand("train", "train one model kind to a checkpoint");
    sub->add_option("--model", train->model, "multi-label | bi-encoder | cross-encoder")
        ->required();
    sub->add_option("--taxonomy", train->taxonomy)->required();
    sub->add_option("--train", train->train)->required();
    sub->add_option("--valid", train->valid)->required();
    sub->add_option("--expansion", train->expansion,
                    "expansion.json restricting classes to the observed set");
    sub->add_option("--out", train->out);
    sub->add_option("--log", train->log, "write per-epoch JSONL");
    sub->add_flag("--tied", train->tied, "bi-encoder: share one encoder for both sides");
    add_encoder_flags(sub, &train->encoder, &train_encoder_kind);
    add_train_flags(sub, &train->train_config);
    sub->callback([train, &train_encoder_kind] {
      train->encoder.kind = encoder_kind_from_string(train_encoder_kind);
      do_train(*train);
    });
  }

  auto eval_args = std::make_shared<EvalArgs>();
  {
    auto* sub = app.add_subcommand("eval", "score a corpus and report ranking metrics");
    sub->add_option("--model", eval_args->model,
                    "multi-label | bi-encoder | cross-encoder | tfidf")
        ->required();
    sub->add_option("--checkpoint", eval_args->checkpoint);
    sub->add_option("--fit", eval_args->fit, "tfidf: corpus to fit document frequencies on");
    sub->add_option("--taxonomy", eval_args->taxonomy)->required();
    sub->add_option("--corpus", eval_args->corpus)->required();
    sub->add_option("--out", eval_args->out);
    sub->add_option("--csv", eval_args->csv, "per-class AP table");
    sub->add_option("--scores-csv", eval_args->scores_csv);
    sub->add_option("--scores-bin", eval_args->scores_bin);
    sub->callback([eval_args] { do_eval(*eval_args); });
  }

  auto run = std::make_shared<RunArgs>();
  {
    auto* sub = app.add_subcommand("run", "end-to-end experiment from a JSON config");
    sub->add_option("--config", run->config)->required();
    sub->add_option("--set", run->sets, "dotted-path override, e.g. train.epochs=5")
        ->take_all();
    sub->callback([run] { do_run(*run); });
  }

  auto sweep = std::make_shared<SweepArgs>();
  {
    auto* sub = app.add_subcommand("sweep", "two-phase filter/re-rank sweep over k");
    sub->add_option("--bi", sweep->bi)->required();
    sub->add_option("--cross", sweep->cross)->required();
    sub->add_option("--taxonomy", sweep->taxonomy)->required();
    sub->add_option("--corpus", sweep->corpus)->required();
    sub->add_option("--k", sweep->k_values, "candidate-list sizes")->required();
    sub->add_option("--out", sweep->out);
    sub->callback([sweep] { do_sweep(*sweep); });
  }

  auto report = std::make_shared<ReportArgs>();
  {
    auto* sub = app.add_subcommand("report", "consolidate a run directory into tables");
    sub->add_option("--run-dir", report->run_dir)->required();
    sub->callback([report] { do_report(*report); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
