#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ztc/corpus.hpp"
#include "ztc/models.hpp"
#include "ztc/rng.hpp"

namespace ztc {

struct TrainConfig {
  double lr_pretrained = 2e-5;  // reserved for imported weights; unused by default
  double lr_random = 2e-4;
  double warmup_fraction = 0.1;
  double max_grad_norm = 10.0;
  int epochs = 20;
  int batch_size = 64;
  int n_neg_classes = 8;
  int n_neg_docs = 4;
  uint64_t seed = 0;
  // Tensors billed at lr_pretrained instead of lr_random; empty by default
  // since every parameter here starts randomly initialized.
  std::vector<std::string> pretrained_tensors;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---- losses ----

// Per-document BCE NLL against every observed class, softplus-stabilized:
//   l = sum_j [ y_j*softplus(-r_j) + (1-y_j)*softplus(r_j) ]
double full_loss_terms(const std::vector<double>& logits, const std::vector<int>& y);

// Categorical NLL of the positive logit against positive + negatives,
// log-sum-exp stabilized.
double ns_loss_from_logits(double positive, const std::vector<double>& negatives);

// One sampled training item: positive pair (doc, cls) plus negatives.
struct NegativeSample {
  size_t doc = 0;
  uint32_t cls = 0;
  std::vector<size_t> neg_docs;       // y[neg_doc][cls] = 0
  std::vector<uint32_t> neg_classes;  // y[doc][neg_class] = 0
  size_t doc_shortfall = 0;           // requested minus available
  size_t class_shortfall = 0;
};

// j uniform over positives of doc; negatives uniform without replacement from
// the complement pools. Pools smaller than requested are used whole and the
// shortfall recorded.
NegativeSample sample_negatives(Rng& rng, size_t doc, const LabelMatrix& labels,
                                size_t n_neg_docs, size_t n_neg_classes);

// ---- optimization ----

// Linear ramp 0 -> base_lr over the first warmup_fraction*total_steps, then
// linear decay to 0 at total_steps. Callers use 1-based steps.
double lr_schedule(size_t step, size_t total_steps, double base_lr, double warmup_fraction);

// Global-norm clipping across all tensors; returns the pre-clip norm.
double clip_gradients(const std::vector<NamedTensor>& grads, double max_norm);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  size_t step = 0;
  std::vector<Tensor> m, v;  // aligned with the parameter list

  static AdamState init(const std::vector<NamedTensor>& params);
};

// Bias-corrected Adam. lrs is per-tensor (two learning-rate groups); throws
// on a NaN gradient, naming the offending tensor.
void adam_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads,
               AdamState& state, const std::vector<double>& lrs);
void adam_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads,
               AdamState& state, double lr);

// ---- per-item loss/gradient primitives (shared by the loops and the
// finite-difference tests) ----

struct MultiLabelGrad {
  EncoderParams encoder;
  Tensor head;
};

// Loss of one document against all observed classes; y aligned with
// model.class_ids. Accumulates into grad when given.
double multilabel_doc_loss(const MultiLabelModel& m, const std::vector<int32_t>& doc_tokens,
                           const std::vector<int>& y, MultiLabelGrad* grad = nullptr);

struct BiEncoderGrad {
  EncoderParams doc_encoder;
  EncoderParams class_encoder;  // ignored when tied
};

// ns_loss of one sampled item under the bi-encoder. doc_tokens/class_tokens
// are pre-tokenized corpora indexed by the sample.
double biencoder_sample_loss(const BiEncoderModel& m,
                             const std::vector<std::vector<int32_t>>& doc_tokens,
                             const std::vector<std::vector<int32_t>>& class_tokens,
                             const NegativeSample& s, BiEncoderGrad* grad = nullptr);

struct CrossEncoderGrad {
  EncoderParams encoder;
  Tensor w;
};

double crossencoder_sample_loss(const CrossEncoderModel& m,
                                const std::vector<std::vector<int32_t>>& doc_tokens,
                                const std::vector<std::vector<int32_t>>& class_tokens,
                                const NegativeSample& s, CrossEncoderGrad* grad = nullptr);

// ---- training loops ----

struct TrainLogEntry {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double valid_lrap = 0.0;
  double lr = 0.0;  // random-group learning rate at the epoch's last step
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  int best_epoch = 0;  // 1-based; argmax valid LRAP, earliest on ties
  void save_jsonl(const std::string& path) const;
};

struct ClassText {
  std::string id;
  std::string text;
};

// All loops: train/valid label columns must agree (the observed classes);
// epochs of shuffled batches; validation LRAP after each epoch; the returned
// model carries the best epoch's parameters.
MultiLabelModel train_multilabel(const LabeledCorpus& train, const LabeledCorpus& valid,
                                 const Vocabulary& vocab, const EncoderConfig& config,
                                 const TrainConfig& tc, TrainLog* log = nullptr);

BiEncoderModel train_biencoder(const LabeledCorpus& train, const LabeledCorpus& valid,
                               const std::vector<ClassText>& classes, const Vocabulary& vocab,
                               const EncoderConfig& config, const TrainConfig& tc,
                               TrainLog* log = nullptr, bool tied = false);

CrossEncoderModel train_crossencoder(const LabeledCorpus& train, const LabeledCorpus& valid,
                                     const std::vector<ClassText>& classes,
                                     const Vocabulary& vocab, const EncoderConfig& config,
                                     const TrainConfig& tc, TrainLog* log = nullptr);

}  // namespace ztc
