#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ztc/expansion.hpp"
#include "ztc/models.hpp"
#include "ztc/pipeline.hpp"
#include "ztc/synthetic.hpp"
#include "ztc/training.hpp"

namespace ztc {

struct SamplingConfig {
  size_t n_train = 3;
  size_t n_valid = 1;
  size_t n_test = 2;
};

struct TwoPhaseSweepConfig {
  bool enabled = false;
  std::vector<int> k_values;
  double coverage = 0.5;  // coverage entry the sweep runs at
};

// One JSON file drives the whole protocol; CLI flags override keys by dotted
// path (e.g. train.epochs=5).
struct ExperimentConfig {
  std::string run_id = "run";
  std::string outdir = "runs";
  uint64_t seed = 0;
  std::string taxonomy_path;  // both empty -> generate the synthetic benchmark
  std::string corpus_path;
  SyntheticSpec synthetic;
  ExpansionOp operation = ExpansionOp::refine;
  std::vector<double> coverages = {1.0, 0.5};
  SamplingConfig sampling;
  std::vector<ModelKind> models = {ModelKind::multi_label, ModelKind::bi_encoder,
                                   ModelKind::cross_encoder, ModelKind::tfidf};
  std::map<std::string, EncoderConfig> encoders;  // keyed by model-kind name
  TrainConfig train;
  TwoPhaseSweepConfig two_phase;

  EncoderConfig encoder_for(ModelKind kind) const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  void validate() const;
};

// Sets a dotted-path key ("train.epochs") to a JSON-parsed value, creating
// intermediate objects as needed.
void set_by_dotted_path(nlohmann::json& root, const std::string& dotted,
                        const std::string& value_text);

// Parses --set overrides against the file contents before type-checking.
ExperimentConfig load_config_with_overrides(const std::string& path,
                                            const std::vector<std::string>& overrides);

struct ExperimentHooks {
  // Called with every class id whose text is rendered while building the
  // training context. Training must never touch a hidden class this way.
  std::function<void(const std::string&)> on_train_class_text;
};

// Runs the full protocol: expand, train per model kind, restore, evaluate on
// all classes, sweep. Writes config-snapshot.json, expansion.json,
// logs.jsonl, report.json and tables/*.csv under {outdir}/{run_id}.
// Returns the run directory.
std::string cmd_run(const ExperimentConfig& config, const ExperimentHooks* hooks = nullptr);

// Generates the synthetic benchmark and writes both files.
void cmd_synth(const SyntheticSpec& spec, const std::string& taxonomy_out,
               const std::string& corpus_out);

// Consolidates a finished run directory into rollup tables
// (tables/model_coverage.csv and tables/root_rollup.csv); returns the rollup
// as JSON for callers that want it.
nlohmann::json cmd_report(const std::string& run_dir);

}  // namespace ztc
