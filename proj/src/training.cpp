#include "ztc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "ztc/errors.hpp"
#include "ztc/metrics.hpp"

namespace ztc {

void TrainConfig::validate() const {
  if (lr_pretrained < 0 || lr_random < 0) throw ConfigError("train: learning rates must be >= 0");
  if (warmup_fraction < 0 || warmup_fraction >= 1)
    throw ConfigError("train: warmup_fraction must be in [0,1)");
  if (max_grad_norm <= 0) throw ConfigError("train: max_grad_norm must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (n_neg_classes < 0 || n_neg_docs < 0) throw ConfigError("train: negative counts must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr_pretrained", c.lr_pretrained},
          {"lr_random", c.lr_random},
          {"warmup_fraction", c.warmup_fraction},
          {"max_grad_norm", c.max_grad_norm},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"n_neg_classes", c.n_neg_classes},
          {"n_neg_docs", c.n_neg_docs},
          {"seed", c.seed},
          {"pretrained_tensors", c.pretrained_tensors}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr_pretrained = j.value("lr_pretrained", c.lr_pretrained);
  c.lr_random = j.value("lr_random", c.lr_random);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.n_neg_classes = j.value("n_neg_classes", c.n_neg_classes);
  c.n_neg_docs = j.value("n_neg_docs", c.n_neg_docs);
  c.seed = j.value("seed", c.seed);
  c.pretrained_tensors = j.value("pretrained_tensors", c.pretrained_tensors);
  c.validate();
  return c;
}

static double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

static double sigmoid(double r) {
  if (r >= 0) return 1.0 / (1.0 + std::exp(-r));
  const double e = std::exp(r);
  return e / (1.0 + e);
}

double full_loss_terms(const std::vector<double>& logits, const std::vector<int>& y) {
  if (logits.size() != y.size()) throw DataError("full_loss: length mismatch");
  double loss = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    loss += y[j] ? softplus(-logits[j]) : softplus(logits[j]);
  }
  return loss;
}

double ns_loss_from_logits(double positive, const std::vector<double>& negatives) {
  double mx = positive;
  for (double n : negatives) mx = std::max(mx, n);
  double sum = std::exp(positive - mx);
  for (double n : negatives) sum += std::exp(n - mx);
  return mx + std::log(sum) - positive;
}

NegativeSample sample_negatives(Rng& rng, size_t doc, const LabelMatrix& labels,
                                size_t n_neg_docs, size_t n_neg_classes) {
  const auto& pos = labels.labels_of(doc);
  if (pos.empty()) throw DataError("sample_negatives: document has no positive labels");
  NegativeSample s;
  s.doc = doc;
  s.cls = pos[rng.index(pos.size())];

  // classes j' with y[doc][j'] = 0: walk the sorted positive list
  std::vector<uint32_t> cls_pool;
  cls_pool.reserve(labels.num_classes() - pos.size());
  size_t pi = 0;
  for (uint32_t c = 0; c < labels.num_classes(); ++c) {
    if (pi < pos.size() && pos[pi] == c) {
      ++pi;
    } else {
      cls_pool.push_back(c);
    }
  }
  if (cls_pool.size() < n_neg_classes) s.class_shortfall = n_neg_classes - cls_pool.size();
  for (size_t idx : rng.sample_without_replacement(cls_pool.size(), n_neg_classes))
    s.neg_classes.push_back(cls_pool[idx]);

  // documents i' with y[i'][cls] = 0
  const auto& cpos = labels.docs_of(s.cls);
  std::vector<size_t> doc_pool;
  doc_pool.reserve(labels.num_docs() - cpos.size());
  size_t di = 0;
  for (uint32_t d = 0; d < labels.num_docs(); ++d) {
    if (di < cpos.size() && cpos[di] == d) {
      ++di;
    } else {
      doc_pool.push_back(d);
    }
  }
  if (doc_pool.size() < n_neg_docs) s.doc_shortfall = n_neg_docs - doc_pool.size();
  for (size_t idx : rng.sample_without_replacement(doc_pool.size(), n_neg_docs))
    s.neg_docs.push_back(doc_pool[idx]);
  return s;
}

double lr_schedule(size_t step, size_t total_steps, double base_lr, double warmup_fraction) {
  if (total_steps == 0) throw ConfigError("lr_schedule: total_steps must be > 0");
  if (step > total_steps) throw ConfigError("lr_schedule: step beyond total_steps");
  double wsteps = std::round(warmup_fraction * static_cast<double>(total_steps));
  if (wsteps >= static_cast<double>(total_steps)) wsteps = static_cast<double>(total_steps) - 1;
  const double s = static_cast<double>(step);
  if (wsteps > 0 && s <= wsteps) return base_lr * (s / wsteps);
  return base_lr * (static_cast<double>(total_steps) - s) /
         (static_cast<double>(total_steps) - wsteps);
}

double clip_gradients(const std::vector<NamedTensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += l2_norm_squared(*g.tensor);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads)
      for (double& x : g.tensor->data) x *= scale;
  }
  return norm;
}

AdamState AdamState::init(const std::vector<NamedTensor>& params) {
  AdamState st;
  for (const auto& p : params) {
    st.m.emplace_back(p.tensor->rows, p.tensor->cols);
    st.v.emplace_back(p.tensor->rows, p.tensor->cols);
  }
  return st;
}

void adam_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads,
               AdamState& state, const std::vector<double>& lrs) {
  if (params.size() != grads.size() || params.size() != lrs.size() ||
      params.size() != state.m.size())
    throw ConfigError("adam: parameter/gradient/state lists misaligned");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& g = *grads[k].tensor;
    if (!p.same_shape(g)) throw ConfigError("adam: shape mismatch for '" + params[k].name + "'");
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const double lr = lrs[k];
    for (size_t e = 0; e < p.data.size(); ++e) {
      const double gr = g.data[e];
      if (std::isnan(gr))
        throw std::runtime_error("adam: NaN gradient in tensor '" + params[k].name + "'");
      m.data[e] = state.beta1 * m.data[e] + (1.0 - state.beta1) * gr;
      v.data[e] = state.beta2 * v.data[e] + (1.0 - state.beta2) * gr * gr;
      const double mhat = m.data[e] / bc1;
      const double vhat = v.data[e] / bc2;
      p.data[e] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void adam_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads,
               AdamState& state, double lr) {
  adam_step(params, grads, state, std::vector<double>(params.size(), lr));
}

// ---- per-item losses ----

double multilabel_doc_loss(const MultiLabelModel& m, const std::vector<int32_t>& doc_tokens,
                           const std::vector<int>& y, MultiLabelGrad* grad) {
  if (y.size() != m.class_ids.size()) throw DataError("full_loss: label row misaligned with head");
  EncodeCache cache;
  Tensor f = encode(m.encoder, doc_tokens, grad ? &cache : nullptr);
  const int d = f.cols;
  const int ny = static_cast<int>(y.size());
  std::vector<double> r(ny);
  for (int j = 0; j < ny; ++j) r[j] = dot(m.head.row_ptr(j), f.row_ptr(0), d);
  const double loss = full_loss_terms(r, y);
  if (grad) {
    Tensor df(1, d);
    for (int j = 0; j < ny; ++j) {
      const double dr = sigmoid(r[j]) - static_cast<double>(y[j]);
      const double* wj = m.head.row_ptr(j);
      double* gw = grad->head.row_ptr(j);
      for (int e = 0; e < d; ++e) {
        gw[e] += dr * f(0, e);
        df(0, e) += dr * wj[e];
      }
    }
    encode_backward(m.encoder, cache, df, grad->encoder);
  }
  return loss;
}

namespace {

// softmax gradient of ns_loss w.r.t. logits: p - onehot(positive at 0)
std::vector<double> ns_logit_grads(double positive, const std::vector<double>& negatives) {
  std::vector<double> g(1 + negatives.size());
  double mx = positive;
  for (double n : negatives) mx = std::max(mx, n);
  double sum = std::exp(positive - mx);
  for (size_t k = 0; k < negatives.size(); ++k) sum += std::exp(negatives[k] - mx);
  g[0] = std::exp(positive - mx) / sum - 1.0;
  for (size_t k = 0; k < negatives.size(); ++k) g[1 + k] = std::exp(negatives[k] - mx) / sum;
  return g;
}

void axpy(Tensor& out, double a, const Tensor& x) {
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += a * x.data[i];
}

}  // namespace

double biencoder_sample_loss(const BiEncoderModel& m,
                             const std::vector<std::vector<int32_t>>& doc_tokens,
                             const std::vector<std::vector<int32_t>>& class_tokens,
                             const NegativeSample& s, BiEncoderGrad* grad) {
  const int d = m.doc_encoder.config.dim;
  const size_t nd = s.neg_docs.size();
  const size_t nc = s.neg_classes.size();

  EncodeCache doc_cache, cls_cache;
  std::vector<EncodeCache> nd_caches(grad ? nd : 0), nc_caches(grad ? nc : 0);

  Tensor fd = encode(m.doc_encoder, doc_tokens.at(s.doc), grad ? &doc_cache : nullptr);
  Tensor fc = encode(m.theta1(), class_tokens.at(s.cls), grad ? &cls_cache : nullptr);
  std::vector<Tensor> fnd(nd), fnc(nc);
  for (size_t a = 0; a < nd; ++a)
    fnd[a] = encode(m.doc_encoder, doc_tokens.at(s.neg_docs[a]), grad ? &nd_caches[a] : nullptr);
  for (size_t b = 0; b < nc; ++b)
    fnc[b] = encode(m.theta1(), class_tokens.at(s.neg_classes[b]), grad ? &nc_caches[b] : nullptr);

  const double pos = dot(fd.row_ptr(0), fc.row_ptr(0), d);
  std::vector<double> negs;
  negs.reserve(nd + nc);
  for (size_t a = 0; a < nd; ++a) negs.push_back(dot(fnd[a].row_ptr(0), fc.row_ptr(0), d));
  for (size_t b = 0; b < nc; ++b) negs.push_back(dot(fd.row_ptr(0), fnc[b].row_ptr(0), d));
  const double loss = ns_loss_from_logits(pos, negs);

  if (grad) {
    const auto g = ns_logit_grads(pos, negs);
    EncoderParams& gdoc = grad->doc_encoder;
    EncoderParams& gcls = m.tied ? grad->doc_encoder : grad->class_encoder;

    Tensor dfd(1, d), dfc(1, d);
    axpy(dfd, g[0], fc);
    axpy(dfc, g[0], fd);
    for (size_t a = 0; a < nd; ++a) {
      Tensor dfa(1, d);
      axpy(dfa, g[1 + a], fc);
      axpy(dfc, g[1 + a], fnd[a]);
      encode_backward(m.doc_encoder, nd_caches[a], dfa, gdoc);
    }
    for (size_t b = 0; b < nc; ++b) {
      Tensor dfb(1, d);
      axpy(dfb, g[1 + nd + b], fd);
      axpy(dfd, g[1 + nd + b], fnc[b]);
      encode_backward(m.theta1(), nc_caches[b], dfb, gcls);
    }
    encode_backward(m.doc_encoder, doc_cache, dfd, gdoc);
    encode_backward(m.theta1(), cls_cache, dfc, gcls);
  }
  return loss;
}

double crossencoder_sample_loss(const CrossEncoderModel& m,
                                const std::vector<std::vector<int32_t>>& doc_tokens,
                                const std::vector<std::vector<int32_t>>& class_tokens,
                                const NegativeSample& s, CrossEncoderGrad* grad) {
  const int max_len = m.encoder.config.max_len;
  const int d = m.encoder.config.dim;
  const size_t nd = s.neg_docs.size();
  const size_t nc = s.neg_classes.size();

  std::vector<std::vector<int32_t>> seqs;
  seqs.reserve(1 + nd + nc);
  seqs.push_back(concat_tokens(doc_tokens.at(s.doc), class_tokens.at(s.cls), max_len));
  for (size_t a = 0; a < nd; ++a)
    seqs.push_back(concat_tokens(doc_tokens.at(s.neg_docs[a]), class_tokens.at(s.cls), max_len));
  for (size_t b = 0; b < nc; ++b)
    seqs.push_back(concat_tokens(doc_tokens.at(s.doc), class_tokens.at(s.neg_classes[b]), max_len));

  std::vector<EncodeCache> caches(grad ? seqs.size() : 0);
  std::vector<Tensor> fs(seqs.size());
  std::vector<double> logits(seqs.size());
  for (size_t k = 0; k < seqs.size(); ++k) {
    fs[k] = encode(m.encoder, seqs[k], grad ? &caches[k] : nullptr);
    logits[k] = dot(m.w.row_ptr(0), fs[k].row_ptr(0), d);
  }
  std::vector<double> negs(logits.begin() + 1, logits.end());
  const double loss = ns_loss_from_logits(logits[0], negs);

  if (grad) {
    const auto g = ns_logit_grads(logits[0], negs);
    for (size_t k = 0; k < seqs.size(); ++k) {
      axpy(grad->w, g[k], fs[k]);
      Tensor df(1, d);
      axpy(df, g[k], m.w);
      encode_backward(m.encoder, caches[k], df, grad->encoder);
    }
  }
  return loss;
}

// ---- training loops ----

void TrainLog::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("training: cannot write '" + path + "'");
  for (const auto& e : entries) {
    nlohmann::json rec = {{"epoch", e.epoch},
                          {"mean_loss", e.mean_loss},
                          {"valid_lrap", e.valid_lrap},
                          {"lr", e.lr}};
    out << rec.dump() << "\n";
  }
}

namespace {

std::vector<NamedTensor> collect(EncoderParams& p, const std::string& prefix) {
  std::vector<NamedTensor> v;
  p.for_each_tensor([&](const std::string& n, Tensor& t) { v.push_back({prefix + n, &t}); });
  return v;
}

void append(std::vector<NamedTensor>& dst, std::vector<NamedTensor> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

std::vector<double> group_lrs(const std::vector<NamedTensor>& params, const TrainConfig& tc,
                              size_t step, size_t total_steps) {
  std::vector<double> lrs(params.size());
  for (size_t k = 0; k < params.size(); ++k) {
    const bool pre = std::find(tc.pretrained_tensors.begin(), tc.pretrained_tensors.end(),
                               params[k].name) != tc.pretrained_tensors.end();
    lrs[k] = lr_schedule(step, total_steps, pre ? tc.lr_pretrained : tc.lr_random,
                         tc.warmup_fraction);
  }
  return lrs;
}

void check_corpora(const LabeledCorpus& train, const LabeledCorpus& valid) {
  if (train.size() == 0) throw DataError("training: empty training corpus");
  if (valid.size() == 0) throw DataError("training: empty validation corpus");
  if (train.labels.class_ids() != valid.labels.class_ids())
    throw DataError("training: train and valid class universes differ");
}

std::vector<std::vector<int32_t>> tokenize_docs(const LabeledCorpus& c, const Vocabulary& vocab,
                                                int max_len) {
  std::vector<std::vector<int32_t>> out(c.size());
  for (size_t i = 0; i < c.size(); ++i)
    out[i] = tokenize(render_document(c.documents[i]), vocab, max_len);
  return out;
}

// class token table aligned with the label-matrix columns
std::vector<std::vector<int32_t>> tokenize_classes(const std::vector<std::string>& class_ids,
                                                   const std::vector<ClassText>& classes,
                                                   const Vocabulary& vocab, int max_len) {
  std::unordered_map<std::string, const std::string*> texts;
  for (const auto& c : classes) texts[c.id] = &c.text;
  std::vector<std::vector<int32_t>> out(class_ids.size());
  for (size_t j = 0; j < class_ids.size(); ++j) {
    auto it = texts.find(class_ids[j]);
    if (it == texts.end())
      throw DataError("training: no class text for '" + class_ids[j] + "'");
    out[j] = tokenize(*it->second, vocab, max_len);
  }
  return out;
}

size_t steps_per_epoch(size_t n_docs, int batch_size) {
  return (n_docs + static_cast<size_t>(batch_size) - 1) / static_cast<size_t>(batch_size);
}

struct EpochRunner {
  std::vector<size_t> order;
  Rng rng;

  explicit EpochRunner(size_t n, uint64_t seed) : order(n), rng(seed) {
    std::iota(order.begin(), order.end(), 0);
  }
  void next_epoch() { rng.shuffle(order); }
};

}  // namespace

MultiLabelModel train_multilabel(const LabeledCorpus& train, const LabeledCorpus& valid,
                                 const Vocabulary& vocab, const EncoderConfig& config,
                                 const TrainConfig& tc, TrainLog* log) {
  config.validate();
  tc.validate();
  check_corpora(train, valid);

  Rng root(tc.seed);
  Rng init_rng = root.sub("init");
  MultiLabelModel model =
      MultiLabelModel::init(config, vocab, train.labels.class_ids(), init_rng);

  const auto doc_toks = tokenize_docs(train, vocab, config.max_len);
  const auto valid_toks = tokenize_docs(valid, vocab, config.max_len);
  const size_t ny = model.class_ids.size();
  std::vector<std::vector<int>> y(train.size(), std::vector<int>(ny, 0));
  for (size_t i = 0; i < train.size(); ++i)
    for (uint32_t c : train.labels.labels_of(i)) y[i][c] = 1;

  MultiLabelGrad grad{EncoderParams::zeros_like(model.encoder),
                      Tensor(model.head.rows, model.head.cols)};
  auto params = collect(model.encoder, "encoder.");
  params.push_back({"head", &model.head});
  auto grads = collect(grad.encoder, "encoder.");
  grads.push_back({"head", &grad.head});

  AdamState adam = AdamState::init(params);
  const size_t spe = steps_per_epoch(train.size(), tc.batch_size);
  const size_t total_steps = spe * static_cast<size_t>(tc.epochs);
  EpochRunner runner(train.size(), Rng::derive_seed(tc.seed, "order"));

  MultiLabelModel best = model;
  double best_lrap = -1.0;
  int best_epoch = 0;
  size_t step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    runner.next_epoch();
    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (size_t b = 0; b < train.size(); b += tc.batch_size) {
      const size_t bn = std::min(train.size() - b, static_cast<size_t>(tc.batch_size));
      for (const auto& g : grads) g.tensor->zero();
      for (size_t o = 0; o < bn; ++o) {
        const size_t i = runner.order[b + o];
        loss_sum += multilabel_doc_loss(model, doc_toks[i], y[i], &grad);
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (const auto& g : grads)
        for (double& x : g.tensor->data) x *= inv;
      clip_gradients(grads, tc.max_grad_norm);
      ++step;
      auto lrs = group_lrs(params, tc, step, total_steps);
      adam_step(params, grads, adam, lrs);
      last_lr = lr_schedule(step, total_steps, tc.lr_random, tc.warmup_fraction);
    }

    Tensor R(static_cast<int>(valid.size()), static_cast<int>(ny));
    for (size_t i = 0; i < valid.size(); ++i) {
      Tensor f = encode(model.encoder, valid_toks[i]);
      for (size_t j = 0; j < ny; ++j)
        R(static_cast<int>(i), static_cast<int>(j)) =
            dot(model.head.row_ptr(static_cast<int>(j)), f.row_ptr(0), f.cols);
    }
    const double vl = lrap(valid.labels, R);
    if (log) log->entries.push_back({epoch, loss_sum / static_cast<double>(train.size()), vl, last_lr});
    if (vl > best_lrap) {
      best_lrap = vl;
      best = model;
      best_epoch = epoch;
    }
  }
  if (log) log->best_epoch = best_epoch;
  return best;
}

BiEncoderModel train_biencoder(const LabeledCorpus& train, const LabeledCorpus& valid,
                               const std::vector<ClassText>& classes, const Vocabulary& vocab,
                               const EncoderConfig& config, const TrainConfig& tc,
                               TrainLog* log, bool tied) {
  config.validate();
  tc.validate();
  check_corpora(train, valid);

  Rng root(tc.seed);
  Rng init_rng = root.sub("init");
  BiEncoderModel model = BiEncoderModel::init(config, vocab, init_rng, tied);

  const auto doc_toks = tokenize_docs(train, vocab, config.max_len);
  const auto valid_toks = tokenize_docs(valid, vocab, config.max_len);
  const auto cls_toks =
      tokenize_classes(train.labels.class_ids(), classes, vocab, config.max_len);

  BiEncoderGrad grad{EncoderParams::zeros_like(model.doc_encoder),
                     tied ? EncoderParams{} : EncoderParams::zeros_like(model.class_encoder)};
  auto params = collect(model.doc_encoder, "doc_encoder.");
  auto grads = collect(grad.doc_encoder, "doc_encoder.");
  if (!tied) {
    append(params, collect(model.class_encoder, "class_encoder."));
    append(grads, collect(grad.class_encoder, "class_encoder."));
  }

  AdamState adam = AdamState::init(params);
  const size_t spe = steps_per_epoch(train.size(), tc.batch_size);
  const size_t total_steps = spe * static_cast<size_t>(tc.epochs);
  EpochRunner runner(train.size(), Rng::derive_seed(tc.seed, "order"));
  Rng neg_rng(Rng::derive_seed(tc.seed, "negatives"));

  BiEncoderModel best = model;
  double best_lrap = -1.0;
  int best_epoch = 0;
  size_t step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    runner.next_epoch();
    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (size_t b = 0; b < train.size(); b += tc.batch_size) {
      const size_t bn = std::min(train.size() - b, static_cast<size_t>(tc.batch_size));
      for (const auto& g : grads) g.tensor->zero();
      for (size_t o = 0; o < bn; ++o) {
        const size_t i = runner.order[b + o];
        const auto s = sample_negatives(neg_rng, i, train.labels, tc.n_neg_docs, tc.n_neg_classes);
        loss_sum += biencoder_sample_loss(model, doc_toks, cls_toks, s, &grad);
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (const auto& g : grads)
        for (double& x : g.tensor->data) x *= inv;
      clip_gradients(grads, tc.max_grad_norm);
      ++step;
      auto lrs = group_lrs(params, tc, step, total_steps);
      adam_step(params, grads, adam, lrs);
      last_lr = lr_schedule(step, total_steps, tc.lr_random, tc.warmup_fraction);
    }

    // validation: encode classes once, then one pass over documents
    const size_t ny = train.labels.num_classes();
    Tensor class_enc(static_cast<int>(ny), config.dim);
    for (size_t j = 0; j < ny; ++j) {
      Tensor fc = encode(model.theta1(), cls_toks[j]);
      std::copy(fc.data.begin(), fc.data.end(), class_enc.row_ptr(static_cast<int>(j)));
    }
    Tensor R(static_cast<int>(valid.size()), static_cast<int>(ny));
    for (size_t i = 0; i < valid.size(); ++i) {
      Tensor fd = encode(model.doc_encoder, valid_toks[i]);
      for (size_t j = 0; j < ny; ++j)
        R(static_cast<int>(i), static_cast<int>(j)) =
            dot(class_enc.row_ptr(static_cast<int>(j)), fd.row_ptr(0), fd.cols);
    }
    const double vl = lrap(valid.labels, R);
    if (log) log->entries.push_back({epoch, loss_sum / static_cast<double>(train.size()), vl, last_lr});
    if (vl > best_lrap) {
      best_lrap = vl;
      best = model;
      best_epoch = epoch;
    }
  }
  if (log) log->best_epoch = best_epoch;
  return best;
}

CrossEncoderModel train_crossencoder(const LabeledCorpus& train, const LabeledCorpus& valid,
                                     const std::vector<ClassText>& classes,
                                     const Vocabulary& vocab, const EncoderConfig& config,
                                     const TrainConfig& tc, TrainLog* log) {
  config.validate();
  tc.validate();
  check_corpora(train, valid);

  Rng root(tc.seed);
  Rng init_rng = root.sub("init");
  CrossEncoderModel model = CrossEncoderModel::init(config, vocab, init_rng);

  const auto doc_toks = tokenize_docs(train, vocab, config.max_len);
  const auto valid_toks = tokenize_docs(valid, vocab, config.max_len);
  const auto cls_toks =
      tokenize_classes(train.labels.class_ids(), classes, vocab, config.max_len);

  CrossEncoderGrad grad{EncoderParams::zeros_like(model.encoder), Tensor(1, config.dim)};
  auto params = collect(model.encoder, "encoder.");
  params.push_back({"w", &model.w});
  auto grads = collect(grad.encoder, "encoder.");
  grads.push_back({"w", &grad.w});

  AdamState adam = AdamState::init(params);
  const size_t spe = steps_per_epoch(train.size(), tc.batch_size);
  const size_t total_steps = spe * static_cast<size_t>(tc.epochs);
  EpochRunner runner(train.size(), Rng::derive_seed(tc.seed, "order"));
  Rng neg_rng(Rng::derive_seed(tc.seed, "negatives"));

  CrossEncoderModel best = model;
  double best_lrap = -1.0;
  int best_epoch = 0;
  size_t step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    runner.next_epoch();
    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (size_t b = 0; b < train.size(); b += tc.batch_size) {
      const size_t bn = std::min(train.size() - b, static_cast<size_t>(tc.batch_size));
      for (const auto& g : grads) g.tensor->zero();
      for (size_t o = 0; o < bn; ++o) {
        const size_t i = runner.order[b + o];
        const auto s = sample_negatives(neg_rng, i, train.labels, tc.n_neg_docs, tc.n_neg_classes);
        loss_sum += crossencoder_sample_loss(model, doc_toks, cls_toks, s, &grad);
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (const auto& g : grads)
        for (double& x : g.tensor->data) x *= inv;
      clip_gradients(grads, tc.max_grad_norm);
      ++step;
      auto lrs = group_lrs(params, tc, step, total_steps);
      adam_step(params, grads, adam, lrs);
      last_lr = lr_schedule(step, total_steps, tc.lr_random, tc.warmup_fraction);
    }

    const size_t ny = train.labels.num_classes();
    Tensor R(static_cast<int>(valid.size()), static_cast<int>(ny));
    for (size_t i = 0; i < valid.size(); ++i) {
      for (size_t j = 0; j < ny; ++j) {
        Tensor f = encode(model.encoder, concat_tokens(valid_toks[i], cls_toks[j], config.max_len));
        R(static_cast<int>(i), static_cast<int>(j)) = dot(model.w.row_ptr(0), f.row_ptr(0), f.cols);
      }
    }
    const double vl = lrap(valid.labels, R);
    if (log) log->entries.push_back({epoch, loss_sum / static_cast<double>(train.size()), vl, last_lr});
    if (vl > best_lrap) {
      best_lrap = vl;
      best = model;
      best_epoch = epoch;
    }
  }
  if (log) log->best_epoch = best_epoch;
  return best;
}

}  // namespace ztc
