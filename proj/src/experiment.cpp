#include "ztc/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "ztc/errors.hpp"
#include "ztc/metrics.hpp"
#include "ztc/tfidf.hpp"

namespace fs = std::filesystem;

namespace ztc {

namespace {

template <typename F>
void run_stage(const std::string& name, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

nlohmann::json synthetic_to_json(const SyntheticSpec& s) {
  return {{"n_roots", s.n_roots},         {"depth", s.depth},
          {"branching", s.branching},     {"vocab_size", s.vocab_size},
          {"docs_per_leaf", s.docs_per_leaf}, {"noise_rate", s.noise_rate},
          {"seed", s.seed}};
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_roots = j.value("n_roots", s.n_roots);
  s.depth = j.value("depth", s.depth);
  s.branching = j.value("branching", s.branching);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.docs_per_leaf = j.value("docs_per_leaf", s.docs_per_leaf);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  s.seed = j.value("seed", s.seed);
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

EncoderConfig ExperimentConfig::encoder_for(ModelKind kind) const {
  auto it = encoders.find(to_string(kind));
  if (it != encoders.end()) return it->second;
  return EncoderConfig{};
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["run_id"] = run_id;
  j["outdir"] = outdir;
  j["seed"] = seed;
  j["taxonomy_path"] = taxonomy_path;
  j["corpus_path"] = corpus_path;
  j["synthetic"] = synthetic_to_json(synthetic);
  j["expansion"] = {{"operation", to_string(operation)}, {"coverages", coverages}};
  j["sampling"] = {{"n_train", sampling.n_train},
                   {"n_valid", sampling.n_valid},
                   {"n_test", sampling.n_test}};
  auto kinds = nlohmann::json::array();
  for (ModelKind k : models) kinds.push_back(to_string(k));
  j["models"] = std::move(kinds);
  auto encs = nlohmann::json::object();
  for (const auto& [name, cfg] : encoders) encs[name] = encoder_config_to_json(cfg);
  j["encoders"] = std::move(encs);
  j["train"] = train_config_to_json(train);
  j["two_phase"] = {{"enabled", two_phase.enabled},
                    {"k_values", two_phase.k_values},
                    {"coverage", two_phase.coverage}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.run_id = j.value("run_id", c.run_id);
  c.outdir = j.value("outdir", c.outdir);
  c.seed = j.value("seed", c.seed);
  c.taxonomy_path = j.value("taxonomy_path", c.taxonomy_path);
  c.corpus_path = j.value("corpus_path", c.corpus_path);
  if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j.at("synthetic"));
  if (j.contains("expansion")) {
    const auto& e = j.at("expansion");
    if (e.contains("operation"))
      c.operation = expansion_op_from_string(e.at("operation").get<std::string>());
    if (e.contains("coverages")) c.coverages = e.at("coverages").get<std::vector<double>>();
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    c.sampling.n_train = s.value("n_train", c.sampling.n_train);
    c.sampling.n_valid = s.value("n_valid", c.sampling.n_valid);
    c.sampling.n_test = s.value("n_test", c.sampling.n_test);
  }
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j.at("models")) c.models.push_back(model_kind_from_string(m));
  }
  if (j.contains("encoders")) {
    for (const auto& [name, cfg] : j.at("encoders").items()) {
      model_kind_from_string(name);  // key check
      c.encoders[name] = encoder_config_from_json(cfg);
    }
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("two_phase")) {
    const auto& t = j.at("two_phase");
    c.two_phase.enabled = t.value("enabled", c.two_phase.enabled);
    if (t.contains("k_values")) c.two_phase.k_values = t.at("k_values").get<std::vector<int>>();
    c.two_phase.coverage = t.value("coverage", c.two_phase.coverage);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  if (run_id.empty()) throw ConfigError("config: run_id must not be empty");
  if (models.empty()) throw ConfigError("config: at least one model kind required");
  if (coverages.empty()) throw ConfigError("config: at least one coverage required");
  for (double c : coverages) {
    if (!(c > 0.0 && c <= 1.0)) throw ConfigError("config: coverages must lie in (0, 1]");
  }
  if (taxonomy_path.empty() != corpus_path.empty())
    throw ConfigError("config: taxonomy_path and corpus_path must be given together");
  if (!taxonomy_path.empty() && !fs::exists(taxonomy_path))
    throw ConfigError("config: taxonomy_path '" + taxonomy_path + "' does not exist");
  if (!corpus_path.empty() && !fs::exists(corpus_path))
    throw ConfigError("config: corpus_path '" + corpus_path + "' does not exist");
  if (sampling.n_train < 1 || sampling.n_valid < 1 || sampling.n_test < 1)
    throw ConfigError("config: sampling counts must be >= 1");
  if (two_phase.enabled) {
    if (two_phase.k_values.empty())
      throw ConfigError("config: two_phase.k_values must not be empty");
    const bool has_bi = std::find(models.begin(), models.end(), ModelKind::bi_encoder) != models.end();
    const bool has_cross =
        std::find(models.begin(), models.end(), ModelKind::cross_encoder) != models.end();
    if (!has_bi || !has_cross)
      throw ConfigError("config: two_phase requires bi-encoder and cross-encoder models");
  }
  train.validate();
  for (const auto& [name, cfg] : encoders) cfg.validate();
}

void set_by_dotted_path(nlohmann::json& root, const std::string& dotted,
                        const std::string& value_text) {
  if (dotted.empty()) throw ConfigError("override: empty key");
  nlohmann::json* cur = &root;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override: malformed key '" + dotted + "'");
    if (dot == std::string::npos) {
      nlohmann::json value;
      try {
        value = nlohmann::json::parse(value_text);
      } catch (const nlohmann::json::exception&) {
        value = value_text;  // bare strings stay strings
      }
      (*cur)[key] = std::move(value);
      return;
    }
    if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = nlohmann::json::object();
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

ExperimentConfig load_config_with_overrides(const std::string& path,
                                            const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  for (const auto& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override: expected key=value, got '" + ov + "'");
    set_by_dotted_path(j, ov.substr(0, eq), ov.substr(eq + 1));
  }
  return ExperimentConfig::from_json(j);
}

void cmd_synth(const SyntheticSpec& spec, const std::string& taxonomy_out,
               const std::string& corpus_out) {
  auto data = generate_synthetic(spec);
  data.taxonomy.save(taxonomy_out);
  save_corpus(data.corpus, corpus_out);
}

namespace {

struct CoverageContext {
  double target = 1.0;
  ExpansionOutput exp;
  LabeledCorpus valid_src;
  std::vector<ClassText> observed_texts;  // training-visible class texts
  std::vector<std::string> train_doc_texts;
  std::vector<std::pair<std::string, std::string>> all_class_texts;  // target universe
};

double mean_ap_over(const EvalReport& rep, const std::vector<std::string>& ids,
                    const ExpansionResult& exp, bool hidden, size_t* count) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& id : ids) {
    auto it = rep.per_class_ap.find(id);
    if (it == rep.per_class_ap.end()) continue;  // skipped column
    if (exp.is_hidden(id) != hidden) continue;
    sum += it->second;
    ++n;
  }
  *count = n;
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

std::string cmd_run(const ExperimentConfig& config, const ExperimentHooks* hooks) {
  config.validate();
  const fs::path dir = fs::path(config.outdir) / config.run_id;
  fs::create_directories(dir / "tables");
  write_text(dir / "config-snapshot.json", config.to_json().dump(2) + "\n");

  Taxonomy tax;
  LabeledCorpus corpus;
  run_stage("data", [&] {
    if (config.taxonomy_path.empty()) {
      SyntheticSpec sp = config.synthetic;
      sp.seed = Rng::derive_seed(config.seed, "synth");
      auto data = generate_synthetic(sp);
      tax = std::move(data.taxonomy);
      corpus = std::move(data.corpus);
      tax.save((dir / "taxonomy.json").string());
      save_corpus(corpus, (dir / "corpus.jsonl").string());
    } else {
      tax = Taxonomy::load(config.taxonomy_path);
      std::vector<std::string> ids;
      for (const auto& n : tax.nodes()) ids.push_back(n.id);
      corpus = load_corpus(config.corpus_path, ids);
    }
  });

  SplitResult split;
  run_stage("split", [&] {
    std::vector<std::string> ids;
    for (const auto& n : tax.nodes()) ids.push_back(n.id);
    split = split_corpus(corpus, ids, config.sampling.n_train, config.sampling.n_valid,
                         config.sampling.n_test, Rng::derive_seed(config.seed, "split"));
    save_split_manifest(split, (dir / "split.json").string());
  });
  const auto& test_ids = split.test.labels.class_ids();
  std::vector<std::string> test_texts;
  for (const auto& d : split.test.documents) test_texts.push_back(render_document(d));

  std::ofstream logs(dir / "logs.jsonl");
  if (!logs) throw DataError("cannot write '" + (dir / "logs.jsonl").string() + "'");

  auto expansions = nlohmann::json::array();
  auto coverage_reports = nlohmann::json::array();
  nlohmann::json two_phase_report;

  for (size_t ci = 0; ci < config.coverages.size(); ++ci) {
    const double cov = config.coverages[ci];
    const std::string tag = "c" + std::to_string(ci);

    CoverageContext ctx;
    ctx.target = cov;
    run_stage("expansion[" + tag + "]", [&] {
      const uint64_t es = Rng::derive_seed(config.seed, "expansion/" + std::to_string(ci));
      if (cov >= 1.0) {
        ctx.exp = identity_expansion(tax, split.train, config.operation, es);
      } else {
        ExpansionSpec spec{config.operation, 1.0 - cov, es};
        ctx.exp = expand(tax, split.train, spec);
      }
      ctx.valid_src = apply_class_map(split.valid, ctx.exp.result);
      for (const auto& id : ctx.exp.result.observed) {
        if (hooks && hooks->on_train_class_text) hooks->on_train_class_text(id);
        ctx.observed_texts.push_back({id, Taxonomy::render_class(tax.node(id))});
      }
      for (const auto& d : ctx.exp.relabeled.documents)
        ctx.train_doc_texts.push_back(render_document(d));
      for (const auto& id : test_ids)
        ctx.all_class_texts.emplace_back(id, Taxonomy::render_class(tax.node(id)));
    });
    expansions.push_back(nlohmann::json::parse(ctx.exp.result.to_json()));

    nlohmann::json model_reports = nlohmann::json::object();
    std::optional<BiEncoderModel> bi_model;
    std::optional<CrossEncoderModel> cross_model;

    for (ModelKind kind : config.models) {
      const std::string kname = to_string(kind);
      const EncoderConfig enc = config.encoder_for(kind);
      TrainConfig tc = config.train;
      tc.seed = Rng::derive_seed(config.seed, "train/" + kname + "/" + std::to_string(ci));

      TrainLog log;
      Tensor R(static_cast<int>(split.test.size()), static_cast<int>(test_ids.size()));
      nlohmann::json extra = nlohmann::json::object();

      run_stage("train[" + tag + "/" + kname + "]", [&] {
        if (kind == ModelKind::tfidf) {
          auto fit = tfidf_fit(ctx.train_doc_texts);
          for (size_t i = 0; i < test_texts.size(); ++i)
            for (size_t j = 0; j < test_ids.size(); ++j)
              R(static_cast<int>(i), static_cast<int>(j)) =
                  tfidf_score(fit, test_texts[i], ctx.all_class_texts[j].second);
          return;
        }
        std::vector<std::string> vocab_texts = ctx.train_doc_texts;
        for (const auto& c : ctx.observed_texts) vocab_texts.push_back(c.text);
        Vocabulary vocab = Vocabulary::build(vocab_texts, enc.vocab_size);

        if (kind == ModelKind::multi_label) {
          auto model = train_multilabel(ctx.exp.relabeled, ctx.valid_src, vocab, enc, tc, &log);
          std::unordered_map<std::string, size_t> col;
          for (size_t j = 0; j < test_ids.size(); ++j) col[test_ids[j]] = j;
          for (size_t i = 0; i < test_texts.size(); ++i) {
            auto row = score_multilabel(model, test_texts[i]);
            for (size_t j = 0; j < model.class_ids.size(); ++j)
              R(static_cast<int>(i), static_cast<int>(col.at(model.class_ids[j]))) =
                  probability(row[j]);
          }
          extra["incapable_classes"] = ctx.exp.result.hidden;
        } else if (kind == ModelKind::bi_encoder) {
          auto model = train_biencoder(ctx.exp.relabeled, ctx.valid_src, ctx.observed_texts,
                                       vocab, enc, tc, &log);
          auto cache = build_class_cache(model, ctx.all_class_texts);
          for (size_t i = 0; i < test_texts.size(); ++i) {
            auto row = score_biencoder_cached(model, cache, test_texts[i]);
            for (size_t j = 0; j < row.size(); ++j)
              R(static_cast<int>(i), static_cast<int>(j)) = row[j];
          }
          bi_model = std::move(model);
        } else {
          auto model = train_crossencoder(ctx.exp.relabeled, ctx.valid_src, ctx.observed_texts,
                                          vocab, enc, tc, &log);
          for (size_t i = 0; i < test_texts.size(); ++i)
            for (size_t j = 0; j < test_ids.size(); ++j)
              R(static_cast<int>(i), static_cast<int>(j)) =
                  score_crossencoder(model, test_texts[i], ctx.all_class_texts[j].second);
          cross_model = std::move(model);
        }
      });

      for (const auto& e : log.entries) {
        nlohmann::json rec = {{"coverage", cov},    {"model", kname},
                              {"epoch", e.epoch},   {"mean_loss", e.mean_loss},
                              {"valid_lrap", e.valid_lrap}, {"lr", e.lr}};
        logs << rec.dump() << "\n";
      }

      run_stage("eval[" + tag + "/" + kname + "]", [&] {
        EvalReport rep = evaluate(split.test.labels, R);
        rep.save_class_ap_csv(
            (dir / "tables" / ("per_class_ap-" + tag + "-" + kname + ".csv")).string());
        size_t n_hidden_scored = 0, n_observed_scored = 0;
        const double hid =
            mean_ap_over(rep, test_ids, ctx.exp.result, true, &n_hidden_scored);
        const double obs =
            mean_ap_over(rep, test_ids, ctx.exp.result, false, &n_observed_scored);
        nlohmann::json mj = {{"lrap", rep.lrap},
                             {"macro_ap", rep.macro_ap},
                             {"observed_macro_ap", obs},
                             {"n_observed_scored", n_observed_scored},
                             {"n_hidden_scored", n_hidden_scored},
                             {"best_epoch", log.best_epoch}};
        mj["hidden_macro_ap"] = n_hidden_scored ? nlohmann::json(hid) : nlohmann::json(nullptr);
        for (auto& [k, v] : extra.items()) mj[k] = v;
        model_reports[kname] = std::move(mj);
      });
    }

    if (config.two_phase.enabled && std::abs(cov - config.two_phase.coverage) < 1e-12) {
      if (!bi_model || !cross_model)
        throw ConfigError("stage sweep[" + tag + "]: trained bi- and cross-encoder required");
      run_stage("sweep[" + tag + "]", [&] {
        SweepTable table = sweep_candidates(*bi_model, *cross_model, split.test,
                                            ctx.all_class_texts, config.two_phase.k_values);
        table.save_csv((dir / "tables" / ("sweep-" + tag + ".csv")).string());
        auto rows = nlohmann::json::array();
        for (const auto& r : table.rows) {
          rows.push_back({{"k", r.k},
                          {"lrap", r.lrap},
                          {"macro_ap", r.macro_ap},
                          {"savings", r.savings}});
        }
        two_phase_report = {{"coverage", cov},
                            {"rows", std::move(rows)},
                            {"references",
                             {{"bi_lrap", table.bi_lrap},
                              {"bi_macro_ap", table.bi_macro_ap},
                              {"cross_lrap", table.cross_lrap},
                              {"cross_macro_ap", table.cross_macro_ap}}}};
      });
    }

    coverage_reports.push_back(
        nlohmann::json{{"coverage_target", cov},
                       {"coverage", ctx.exp.result.coverage},
                       {"n_hidden", ctx.exp.result.hidden.size()},
                       {"n_observed", ctx.exp.result.observed.size()},
                       {"n_train_docs", ctx.exp.relabeled.size()},
                       {"n_valid_docs", ctx.valid_src.size()},
                       {"n_test_docs", split.test.size()},
                       {"models", std::move(model_reports)}});
  }

  write_text(dir / "expansion.json", expansions.dump(2) + "\n");

  nlohmann::json report;
  report["run_id"] = config.run_id;
  report["seed"] = config.seed;
  report["operation"] = to_string(config.operation);
  report["n_classes"] = tax.size();
  report["n_docs"] = corpus.size();
  report["coverages"] = std::move(coverage_reports);
  report["two_phase"] = two_phase_report.is_null() ? nlohmann::json(nullptr) : two_phase_report;
  write_text(dir / "report.json", report.dump(2) + "\n");
  return dir.string();
}

namespace {

struct PerClassRow {
  std::string class_id;
  double ap = 0.0;
  size_t n_positives = 0;
};

std::vector<PerClassRow> read_per_class_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("report: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "class_id,ap,n_positives")
    throw DataError("report: unexpected header in '" + path.string() + "'");
  std::vector<PerClassRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1)
      throw DataError("report: malformed row in '" + path.string() + "'");
    PerClassRow r;
    r.class_id = line.substr(0, c1);
    r.ap = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    r.n_positives = static_cast<size_t>(std::stoull(line.substr(c2 + 1)));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

nlohmann::json cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream rin(dir / "report.json");
  if (!rin) throw DataError("report: missing report.json in '" + run_dir + "'");
  nlohmann::json report;
  rin >> report;

  std::ifstream ein(dir / "expansion.json");
  if (!ein) throw DataError("report: missing expansion.json in '" + run_dir + "'");
  nlohmann::json expansions;
  ein >> expansions;

  // taxonomy: synthetic runs store it beside the report, otherwise the
  // config snapshot carries the original path
  fs::path tax_path = dir / "taxonomy.json";
  if (!fs::exists(tax_path)) {
    std::ifstream cin_(dir / "config-snapshot.json");
    if (!cin_) throw DataError("report: missing config-snapshot.json in '" + run_dir + "'");
    nlohmann::json snapshot;
    cin_ >> snapshot;
    tax_path = snapshot.at("taxonomy_path").get<std::string>();
  }
  Taxonomy tax = Taxonomy::load(tax_path.string());

  std::ofstream mc(dir / "tables" / "model_coverage.csv");
  if (!mc) throw DataError("report: cannot write model_coverage.csv");
  mc << "coverage_target,model,lrap,macro_ap\n";
  char buf[160];

  std::ofstream rr(dir / "tables" / "root_rollup.csv");
  if (!rr) throw DataError("report: cannot write root_rollup.csv");
  rr << "coverage_target,model,root,scope,n_classes,macro_ap\n";

  auto rollup = nlohmann::json::array();
  const auto& coverages = report.at("coverages");
  for (size_t ci = 0; ci < coverages.size(); ++ci) {
    const auto& centry = coverages[ci];
    const double cov = centry.at("coverage_target").get<double>();
    const std::string tag = "c" + std::to_string(ci);
    std::set<std::string> hidden;
    for (const auto& h : expansions.at(ci).at("hidden"))
      hidden.insert(h.get<std::string>());

    for (const auto& [model, mj] : centry.at("models").items()) {
      std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g", cov, model.c_str(),
                    mj.at("lrap").get<double>(), mj.at("macro_ap").get<double>());
      mc << buf << "\n";

      const auto rows =
          read_per_class_csv(dir / "tables" / ("per_class_ap-" + tag + "-" + model + ".csv"));
      // root -> (new sum, new n, old sum, old n)
      std::map<std::string, std::array<double, 4>> agg;
      for (const auto& r : rows) {
        auto& a = agg[tax.root_of(r.class_id)];
        if (hidden.count(r.class_id)) {
          a[0] += r.ap;
          a[1] += 1;
        } else {
          a[2] += r.ap;
          a[3] += 1;
        }
      }
      for (const auto& [root, a] : agg) {
        const auto emit = [&](const char* scope, double sum, double n) {
          if (n == 0) return;
          std::snprintf(buf, sizeof(buf), "%.17g,%s,%s,%s,%zu,%.17g", cov, model.c_str(),
                        root.c_str(), scope, static_cast<size_t>(n), sum / n);
          rr << buf << "\n";
          rollup.push_back(nlohmann::json{{"coverage_target", cov},
                                          {"model", model},
                                          {"root", root},
                                          {"scope", scope},
                                          {"n_classes", static_cast<size_t>(n)},
                                          {"macro_ap", sum / n}});
        };
        emit("new", a[0], a[1]);
        emit("old", a[2], a[3]);
        emit("all", a[0] + a[2], a[1] + a[3]);
      }
    }
  }
  return rollup;
}

}  // namespace ztc
