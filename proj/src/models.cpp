#include "ztc/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ztc/checkpoint.hpp"
#include "ztc/errors.hpp"

namespace ztc {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::multi_label: return "multi-label";
    case ModelKind::bi_encoder: return "bi-encoder";
    case ModelKind::cross_encoder: return "cross-encoder";
    case ModelKind::tfidf: return "tfidf";
  }
  throw ConfigError("models: unknown kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "multi-label") return ModelKind::multi_label;
  if (s == "bi-encoder") return ModelKind::bi_encoder;
  if (s == "cross-encoder") return ModelKind::cross_encoder;
  if (s == "tfidf") return ModelKind::tfidf;
  throw ConfigError("models: unknown kind '" + s + "'");
}

nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"kind", to_string(c.kind)}, {"dim", c.dim},       {"max_len", c.max_len},
          {"vocab_size", c.vocab_size}, {"layers", c.layers}, {"heads", c.heads},
          {"ffn", c.ffn}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
  c.dim = j.at("dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.validate();
  return c;
}

MultiLabelModel MultiLabelModel::init(const EncoderConfig& config, const Vocabulary& vocab,
                                      std::vector<std::string> class_ids, Rng& rng) {
  if (class_ids.empty()) throw ConfigError("multi-label: no observed classes");
  MultiLabelModel m;
  m.vocab = vocab;
  Rng enc_rng = rng.sub("encoder");
  m.encoder = EncoderParams::init(config, enc_rng);
  std::sort(class_ids.begin(), class_ids.end());
  m.class_ids = std::move(class_ids);
  for (size_t i = 0; i < m.class_ids.size(); ++i) m.class_index[m.class_ids[i]] = i;
  m.head = Tensor(static_cast<int>(m.class_ids.size()), config.dim);
  Rng head_rng = rng.sub("head");
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
  for (double& x : m.head.data) x = head_rng.normal() * scale;
  return m;
}

std::vector<double> score_multilabel(const MultiLabelModel& m, const std::string& doc_text,
                                     ScoreStats* stats) {
  auto toks = tokenize(doc_text, m.vocab, m.encoder.config.max_len);
  Tensor f = encode(m.encoder, toks);
  if (stats) ++stats->doc_encodes;
  std::vector<double> r(m.class_ids.size());
  for (size_t j = 0; j < r.size(); ++j) r[j] = dot(m.head.row_ptr(static_cast<int>(j)), f.row_ptr(0), f.cols);
  return r;
}

double score_multilabel(const MultiLabelModel& m, const std::string& doc_text,
                        const std::string& class_id) {
  auto it = m.class_index.find(class_id);
  if (it == m.class_index.end())
    throw DataError("multi-label: class '" + class_id + "' was not observed during training");
  auto toks = tokenize(doc_text, m.vocab, m.encoder.config.max_len);
  Tensor f = encode(m.encoder, toks);
  return dot(m.head.row_ptr(static_cast<int>(it->second)), f.row_ptr(0), f.cols);
}

BiEncoderModel BiEncoderModel::init(const EncoderConfig& config, const Vocabulary& vocab,
                                    Rng& rng, bool tied) {
  BiEncoderModel m;
  m.vocab = vocab;
  m.tied = tied;
  Rng doc_rng = rng.sub("doc_encoder");
  m.doc_encoder = EncoderParams::init(config, doc_rng);
  if (!tied) {
    Rng cls_rng = rng.sub("class_encoder");
    m.class_encoder = EncoderParams::init(config, cls_rng);
  }
  return m;
}

double score_biencoder(const BiEncoderModel& m, const std::string& doc_text,
                       const std::string& class_text, ScoreStats* stats) {
  const int max_len = m.doc_encoder.config.max_len;
  Tensor fd = encode(m.doc_encoder, tokenize(doc_text, m.vocab, max_len));
  Tensor fc = encode(m.theta1(), tokenize(class_text, m.vocab, max_len));
  if (stats) {
    ++stats->doc_encodes;
    ++stats->class_encodes;
  }
  return dot(fd.row_ptr(0), fc.row_ptr(0), fd.cols);
}

ClassEncodingCache build_class_cache(const BiEncoderModel& m,
                                     const std::vector<std::pair<std::string, std::string>>& classes,
                                     ScoreStats* stats) {
  ClassEncodingCache cache;
  cache.encodings = Tensor(static_cast<int>(classes.size()), m.doc_encoder.config.dim);
  const int max_len = m.doc_encoder.config.max_len;
  for (size_t i = 0; i < classes.size(); ++i) {
    cache.class_ids.push_back(classes[i].first);
    Tensor fc = encode(m.theta1(), tokenize(classes[i].second, m.vocab, max_len));
    if (stats) ++stats->class_encodes;
    std::copy(fc.data.begin(), fc.data.end(), cache.encodings.row_ptr(static_cast<int>(i)));
  }
  return cache;
}

std::vector<double> score_biencoder_cached(const BiEncoderModel& m,
                                           const ClassEncodingCache& cache,
                                           const std::string& doc_text, ScoreStats* stats) {
  Tensor fd = encode(m.doc_encoder, tokenize(doc_text, m.vocab, m.doc_encoder.config.max_len));
  if (stats) ++stats->doc_encodes;
  std::vector<double> r(cache.class_ids.size());
  for (size_t j = 0; j < r.size(); ++j)
    r[j] = dot(cache.encodings.row_ptr(static_cast<int>(j)), fd.row_ptr(0), fd.cols);
  return r;
}

CrossEncoderModel CrossEncoderModel::init(const EncoderConfig& config, const Vocabulary& vocab,
                                          Rng& rng) {
  CrossEncoderModel m;
  m.vocab = vocab;
  Rng enc_rng = rng.sub("encoder");
  m.encoder = EncoderParams::init(config, enc_rng);
  m.w = Tensor(1, config.dim);
  Rng w_rng = rng.sub("w");
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
  for (double& x : m.w.data) x = w_rng.normal() * scale;
  return m;
}

std::vector<int32_t> concat_tokens(const std::vector<int32_t>& doc_tokens,
                                   const std::vector<int32_t>& class_tokens, int max_len) {
  if (max_len < 1) throw ConfigError("concat_tokens: max_len must be >= 1");
  const size_t avail = static_cast<size_t>(max_len) - 1;
  size_t class_take = std::min(class_tokens.size(), avail / 2);
  size_t doc_take = std::min(doc_tokens.size(), avail - class_take);
  class_take = std::min(class_tokens.size(), avail - doc_take);
  std::vector<int32_t> out;
  out.reserve(doc_take + 1 + class_take);
  out.insert(out.end(), doc_tokens.begin(), doc_tokens.begin() + static_cast<long>(doc_take));
  out.push_back(Vocabulary::kSep);
  out.insert(out.end(), class_tokens.begin(), class_tokens.begin() + static_cast<long>(class_take));
  return out;
}

double score_crossencoder(const CrossEncoderModel& m, const std::string& doc_text,
                          const std::string& class_text, ScoreStats* stats) {
  const int max_len = m.encoder.config.max_len;
  auto doc_toks = tokenize(doc_text, m.vocab, max_len);
  auto cls_toks = tokenize(class_text, m.vocab, max_len);
  Tensor f = encode(m.encoder, concat_tokens(doc_toks, cls_toks, max_len));
  if (stats) ++stats->cross_encodes;
  return dot(m.w.row_ptr(0), f.row_ptr(0), f.cols);
}

double probability(double r) {
  double p;
  if (r >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-r));
  } else {
    const double e = std::exp(r);
    p = e / (1.0 + e);
  }
  if (p >= 1.0) p = std::nextafter(1.0, 0.0);
  if (p <= 0.0) p = std::nextafter(0.0, 1.0);
  return p;
}

void ScoreMatrix::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("scores: cannot write '" + path + "'");
  out << "doc_id,class_id,score\n";
  char buf[64];
  for (size_t i = 0; i < doc_ids.size(); ++i) {
    for (size_t j = 0; j < class_ids.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", scores(static_cast<int>(i), static_cast<int>(j)));
      out << doc_ids[i] << "," << class_ids[j] << "," << buf << "\n";
    }
  }
}

static const char kScoreMagic[8] = {'Z', 'T', 'C', 'S', 'C', 'R', '0', '1'};

void ScoreMatrix::save_binary(const std::string& path) const {
  nlohmann::json header = {{"doc_ids", doc_ids}, {"class_ids", class_ids}};
  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("scores: cannot write '" + path + "'");
  out.write(kScoreMagic, sizeof(kScoreMagic));
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  std::vector<float> row(class_ids.size());
  for (size_t i = 0; i < doc_ids.size(); ++i) {
    for (size_t j = 0; j < class_ids.size(); ++j)
      row[j] = static_cast<float>(scores(static_cast<int>(i), static_cast<int>(j)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw DataError("scores: write failure on '" + path + "'");
}

ScoreMatrix ScoreMatrix::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("scores: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kScoreMagic, sizeof(kScoreMagic)) != 0)
    throw DataError("scores: bad magic in '" + path + "'");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("scores: truncated header in '" + path + "'");
  nlohmann::json header = nlohmann::json::parse(htext);
  ScoreMatrix sm;
  sm.doc_ids = header.at("doc_ids").get<std::vector<std::string>>();
  sm.class_ids = header.at("class_ids").get<std::vector<std::string>>();
  sm.scores = Tensor(static_cast<int>(sm.doc_ids.size()), static_cast<int>(sm.class_ids.size()));
  std::vector<float> row(sm.class_ids.size());
  for (size_t i = 0; i < sm.doc_ids.size(); ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw DataError("scores: truncated payload in '" + path + "'");
    for (size_t j = 0; j < sm.class_ids.size(); ++j)
      sm.scores(static_cast<int>(i), static_cast<int>(j)) = row[j];
  }
  return sm;
}

namespace {

void add_encoder_tensors(Checkpoint& ck, const std::string& prefix, const EncoderParams& p) {
  p.for_each_tensor([&](const std::string& name, const Tensor& t) {
    ck.add(prefix + name, t);
  });
}

void read_encoder_tensors(const Checkpoint& ck, const std::string& prefix, EncoderParams& p) {
  p.for_each_tensor([&](const std::string& name, Tensor& t) {
    const Tensor& src = ck.tensor(prefix + name);
    if (!t.same_shape(src)) throw DataError("checkpoint: shape mismatch for '" + prefix + name + "'");
    t = src;
  });
}

EncoderParams empty_params(const EncoderConfig& config) {
  // allocate the right shapes with a throwaway stream, then overwrite
  Rng rng(0);
  return EncoderParams::init(config, rng);
}

}  // namespace

void save_multilabel(const MultiLabelModel& m, const std::string& path) {
  Checkpoint ck;
  ck.meta = {{"model_kind", "multi-label"},
             {"config", encoder_config_to_json(m.encoder.config)},
             {"vocab", m.vocab.tokens()},
             {"class_ids", m.class_ids}};
  add_encoder_tensors(ck, "encoder.", m.encoder);
  ck.add("head", m.head);
  ck.save(path);
}

MultiLabelModel load_multilabel(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.at("model_kind") != "multi-label")
    throw DataError("checkpoint: not a multi-label model: '" + path + "'");
  MultiLabelModel m;
  m.vocab = Vocabulary::from_tokens(ck.meta.at("vocab").get<std::vector<std::string>>());
  m.encoder = empty_params(encoder_config_from_json(ck.meta.at("config")));
  read_encoder_tensors(ck, "encoder.", m.encoder);
  m.class_ids = ck.meta.at("class_ids").get<std::vector<std::string>>();
  for (size_t i = 0; i < m.class_ids.size(); ++i) m.class_index[m.class_ids[i]] = i;
  m.head = ck.tensor("head");
  if (m.head.rows != static_cast<int>(m.class_ids.size()))
    throw DataError("checkpoint: head row count mismatch in '" + path + "'");
  return m;
}

void save_biencoder(const BiEncoderModel& m, const std::string& path) {
  Checkpoint ck;
  ck.meta = {{"model_kind", "bi-encoder"},
             {"config", encoder_config_to_json(m.doc_encoder.config)},
             {"vocab", m.vocab.tokens()},
             {"tied", m.tied}};
  add_encoder_tensors(ck, "doc_encoder.", m.doc_encoder);
  if (!m.tied) add_encoder_tensors(ck, "class_encoder.", m.class_encoder);
  ck.save(path);
}

BiEncoderModel load_biencoder(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.at("model_kind") != "bi-encoder")
    throw DataError("checkpoint: not a bi-encoder model: '" + path + "'");
  BiEncoderModel m;
  m.vocab = Vocabulary::from_tokens(ck.meta.at("vocab").get<std::vector<std::string>>());
  m.tied = ck.meta.at("tied").get<bool>();
  const EncoderConfig config = encoder_config_from_json(ck.meta.at("config"));
  m.doc_encoder = empty_params(config);
  read_encoder_tensors(ck, "doc_encoder.", m.doc_encoder);
  if (!m.tied) {
    m.class_encoder = empty_params(config);
    read_encoder_tensors(ck, "class_encoder.", m.class_encoder);
  }
  return m;
}

void save_crossencoder(const CrossEncoderModel& m, const std::string& path) {
  Checkpoint ck;
  ck.meta = {{"model_kind", "cross-encoder"},
             {"config", encoder_config_to_json(m.encoder.config)},
             {"vocab", m.vocab.tokens()}};
  add_encoder_tensors(ck, "encoder.", m.encoder);
  ck.add("w", m.w);
  ck.save(path);
}

CrossEncoderModel load_crossencoder(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.at("model_kind") != "cross-encoder")
    throw DataError("checkpoint: not a cross-encoder model: '" + path + "'");
  CrossEncoderModel m;
  m.vocab = Vocabulary::from_tokens(ck.meta.at("vocab").get<std::vector<std::string>>());
  m.encoder = empty_params(encoder_config_from_json(ck.meta.at("config")));
  read_encoder_tensors(ck, "encoder.", m.encoder);
  m.w = ck.tensor("w");
  return m;
}

}  // namespace ztc
