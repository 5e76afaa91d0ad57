#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ztc/rng.hpp"
#include "ztc/tensor.hpp"
#include "ztc/vocab.hpp"

namespace ztc {

enum class EncoderKind { bag_of_embeddings, tiny_transformer, tfidf };

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::bag_of_embeddings;
  int dim = 64;
  int max_len = 64;
  int vocab_size = 8192;
  // tiny-transformer only
  int layers = 1;
  int heads = 2;
  int ffn = 128;

  void validate() const;  // throws ConfigError
};

struct TransformerLayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // projections d x d, biases 1 x d
  Tensor ln1_gain, ln1_bias;              // 1 x d
  Tensor w1, b1;                          // d x ffn, 1 x ffn
  Tensor w2, b2;                          // ffn x d, 1 x d
  Tensor ln2_gain, ln2_bias;              // 1 x d
};

// Trainable state for one encoder. Bag-of-embeddings uses token_embedding,
// proj_w, proj_b; the transformer uses token_embedding, pos_embedding and the
// per-layer blocks. Unused tensors stay empty.
struct EncoderParams {
  EncoderConfig config;
  Tensor token_embedding;  // vocab_size x d
  Tensor proj_w, proj_b;   // d x d, 1 x d
  Tensor pos_embedding;    // max_len x d
  std::vector<TransformerLayerParams> layers;

  static EncoderParams init(const EncoderConfig& config, Rng& rng);
  static EncoderParams zeros_like(const EncoderParams& other);

  // Visits each trainable tensor in a fixed order (the same order init fills
  // them). The mutable overload is also used to enumerate gradient buffers.
  void for_each_tensor(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

struct TransformerLayerCache {
  Tensor x_in;                   // n x d
  Tensor q, k, v;                // n x d
  std::vector<Tensor> attn;     // per head, n x n softmax rows
  Tensor concat;                 // n x d, heads joined, pre-output-projection
  Tensor sum1;                   // x_in + attention output
  Tensor norm1_hat;              // (sum1 - mean)/std, n x d
  std::vector<double> inv_std1;  // per position
  Tensor x1;                     // post-LN1
  Tensor ffn_pre;                // n x ffn
  Tensor ffn_act;                // n x ffn, GELU applied
  Tensor sum2;                   // x1 + ffn output
  Tensor norm2_hat;
  std::vector<double> inv_std2;
  Tensor x2;                     // layer output
};

struct EncodeCache {
  std::vector<int32_t> tokens;  // after empty-input substitution and truncation
  Tensor mean;                  // bag-of-embeddings: 1 x d token mean
  Tensor out;                   // 1 x d final output (pre-tanh for BOE in pre_act)
  Tensor pre_act;               // 1 x d
  Tensor x0;                    // transformer: n x d embedding + position
  std::vector<TransformerLayerCache> layers;
};

// Maps a token sequence to a 1 x d row vector. An empty sequence encodes as
// the reserved EMPTY token. Sequences are truncated to config.max_len for the
// transformer kind. Pass a cache to enable encode_backward.
Tensor encode(const EncoderParams& params, const std::vector<int32_t>& tokens,
              EncodeCache* cache = nullptr);

// Accumulates d(loss)/d(theta) into grad, given dout = d(loss)/d(output) as a
// 1 x d row and the cache produced by the matching encode call.
void encode_backward(const EncoderParams& params, const EncodeCache& cache,
                     const Tensor& dout, EncoderParams& grad);

// Exact GELU and its derivative, shared with tests.
double gelu(double z);
double gelu_grad(double z);

}  // namespace ztc
