#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ztc/encoder.hpp"
#include "ztc/rng.hpp"
#include "ztc/tensor.hpp"
#include "ztc/vocab.hpp"

namespace ztc {

enum class ModelKind { multi_label, bi_encoder, cross_encoder, tfidf };
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

nlohmann::json encoder_config_to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Forward-pass accounting for compute-savings claims; attach where needed.
struct ScoreStats {
  size_t doc_encodes = 0;
  size_t class_encodes = 0;
  size_t cross_encodes = 0;
};

// Per-class weight rows over a fixed observed-class list. Classes outside the
// list cannot be scored at all.
struct MultiLabelModel {
  Vocabulary vocab;
  EncoderParams encoder;
  Tensor head;                        // |observed| x d, row j holds w_j
  std::vector<std::string> class_ids;  // sorted, aligned with head rows
  std::unordered_map<std::string, size_t> class_index;

  static MultiLabelModel init(const EncoderConfig& config, const Vocabulary& vocab,
                              std::vector<std::string> class_ids, Rng& rng);
  bool can_score(const std::string& class_id) const { return class_index.count(class_id) > 0; }
};

// Scores all observed classes: r_j = w_j . f(x). Aligned with class_ids.
std::vector<double> score_multilabel(const MultiLabelModel& m, const std::string& doc_text,
                                     ScoreStats* stats = nullptr);
// Single-class variant; throws DataError on a class the head does not cover.
double score_multilabel(const MultiLabelModel& m, const std::string& doc_text,
                        const std::string& class_id);

struct BiEncoderModel {
  Vocabulary vocab;
  EncoderParams class_encoder;  // theta_1
  EncoderParams doc_encoder;    // theta_2
  bool tied = false;            // share doc_encoder for both sides

  const EncoderParams& theta1() const { return tied ? doc_encoder : class_encoder; }

  static BiEncoderModel init(const EncoderConfig& config, const Vocabulary& vocab, Rng& rng,
                             bool tied = false);
};

double score_biencoder(const BiEncoderModel& m, const std::string& doc_text,
                       const std::string& class_text, ScoreStats* stats = nullptr);

struct ClassEncodingCache {
  std::vector<std::string> class_ids;
  Tensor encodings;  // |Y| x d
};

// classes are (id, rendered text) pairs; encoding order = given order.
ClassEncodingCache build_class_cache(const BiEncoderModel& m,
                                     const std::vector<std::pair<std::string, std::string>>& classes,
                                     ScoreStats* stats = nullptr);

// One doc-encoder call, |Y| dot products. Row aligned with cache.class_ids.
std::vector<double> score_biencoder_cached(const BiEncoderModel& m,
                                           const ClassEncodingCache& cache,
                                           const std::string& doc_text,
                                           ScoreStats* stats = nullptr);

struct CrossEncoderModel {
  Vocabulary vocab;
  EncoderParams encoder;
  Tensor w;  // 1 x d readout

  static CrossEncoderModel init(const EncoderConfig& config, const Vocabulary& vocab, Rng& rng);
};

// doc + SEP + class under a max_len budget: the class side keeps at most
// floor((max_len-1)/2) tokens, the document the rest; slack flows to
// whichever side still has tokens.
std::vector<int32_t> concat_tokens(const std::vector<int32_t>& doc_tokens,
                                   const std::vector<int32_t>& class_tokens, int max_len);

double score_crossencoder(const CrossEncoderModel& m, const std::string& doc_text,
                          const std::string& class_text, ScoreStats* stats = nullptr);

// Stable sigmoid clamped to the open interval (0, 1).
double probability(double r);

struct ScoreMatrix {
  std::vector<std::string> doc_ids;
  std::vector<std::string> class_ids;
  Tensor scores;  // |D| x |Y|, row-aligned with doc_ids

  void save_csv(const std::string& path) const;     // doc_id,class_id,score
  void save_binary(const std::string& path) const;  // float32 payload
  static ScoreMatrix load_binary(const std::string& path);
};

void save_multilabel(const MultiLabelModel& m, const std::string& path);
MultiLabelModel load_multilabel(const std::string& path);
void save_biencoder(const BiEncoderModel& m, const std::string& path);
BiEncoderModel load_biencoder(const std::string& path);
void save_crossencoder(const CrossEncoderModel& m, const std::string& path);
CrossEncoderModel load_crossencoder(const std::string& path);

}  // namespace ztc
