#include "ztc/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ztc/errors.hpp"

namespace ztc {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::bag_of_embeddings: return "bag-of-embeddings";
    case EncoderKind::tiny_transformer: return "tiny-transformer";
    case EncoderKind::tfidf: return "tfidf";
  }
  throw ConfigError("encoder: unknown kind");
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "bag-of-embeddings") return EncoderKind::bag_of_embeddings;
  if (s == "tiny-transformer") return EncoderKind::tiny_transformer;
  if (s == "tfidf") return EncoderKind::tfidf;
  throw ConfigError("encoder: unknown kind '" + s + "'");
}

void EncoderConfig::validate() const {
  if (dim < 1) throw ConfigError("encoder: dim must be >= 1");
  if (max_len < 1) throw ConfigError("encoder: max_len must be >= 1");
  if (vocab_size < static_cast<int>(Vocabulary::kNumSpecial) + 1)
    throw ConfigError("encoder: vocab_size too small");
  if (kind == EncoderKind::tiny_transformer) {
    if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
    if (heads < 1) throw ConfigError("encoder: heads must be >= 1");
    if (ffn < 1) throw ConfigError("encoder: ffn must be >= 1");
    if (dim % heads != 0) throw ConfigError("encoder: dim must be divisible by heads");
  }
}

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * M_SQRT1_2)); }

double gelu_grad(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return 0.5 * (1.0 + std::erf(z * M_SQRT1_2)) + z * inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

void EncoderParams::for_each_tensor(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("token_embedding", token_embedding);
  if (config.kind == EncoderKind::bag_of_embeddings) {
    fn("proj_w", proj_w);
    fn("proj_b", proj_b);
    return;
  }
  fn("pos_embedding", pos_embedding);
  for (size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    fn(p + "wq", L.wq);
    fn(p + "bq", L.bq);
    fn(p + "wk", L.wk);
    fn(p + "bk", L.bk);
    fn(p + "wv", L.wv);
    fn(p + "bv", L.bv);
    fn(p + "wo", L.wo);
    fn(p + "bo", L.bo);
    fn(p + "ln1_gain", L.ln1_gain);
    fn(p + "ln1_bias", L.ln1_bias);
    fn(p + "w1", L.w1);
    fn(p + "b1", L.b1);
    fn(p + "w2", L.w2);
    fn(p + "b2", L.b2);
    fn(p + "ln2_gain", L.ln2_gain);
    fn(p + "ln2_bias", L.ln2_bias);
  }
}

void EncoderParams::for_each_tensor(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<EncoderParams*>(this)->for_each_tensor(
      [&](const std::string& name, Tensor& t) { fn(name, t); });
}

EncoderParams EncoderParams::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  if (config.kind == EncoderKind::tfidf)
    throw ConfigError("encoder: tfidf kind has no trainable parameters");
  EncoderParams p;
  p.config = config;
  const int d = config.dim;
  p.token_embedding = Tensor(config.vocab_size, d);
  if (config.kind == EncoderKind::bag_of_embeddings) {
    p.proj_w = Tensor(d, d);
    p.proj_b = Tensor(1, d);
  } else {
    p.pos_embedding = Tensor(config.max_len, d);
    p.layers.resize(config.layers);
    for (auto& L : p.layers) {
      L.wq = Tensor(d, d);
      L.bq = Tensor(1, d);
      L.wk = Tensor(d, d);
      L.bk = Tensor(1, d);
      L.wv = Tensor(d, d);
      L.bv = Tensor(1, d);
      L.wo = Tensor(d, d);
      L.bo = Tensor(1, d);
      L.ln1_gain = Tensor(1, d);
      L.ln1_bias = Tensor(1, d);
      L.w1 = Tensor(d, config.ffn);
      L.b1 = Tensor(1, config.ffn);
      L.w2 = Tensor(config.ffn, d);
      L.b2 = Tensor(1, d);
      L.ln2_gain = Tensor(1, d);
      L.ln2_bias = Tensor(1, d);
    }
  }
  const double emb_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double ffn_scale = 1.0 / std::sqrt(static_cast<double>(config.ffn));
  p.for_each_tensor([&](const std::string& name, Tensor& t) {
    const std::string leaf = name.substr(name.find('.') + 1);  // npos+1 == 0
    if (leaf.rfind("ln", 0) == 0) {
      std::fill(t.data.begin(), t.data.end(),
                leaf.find("gain") != std::string::npos ? 1.0 : 0.0);
    } else if (leaf[0] == 'b' || leaf == "proj_b") {
      t.zero();
    } else {
      const double scale = leaf == "w2" ? ffn_scale : emb_scale;
      for (double& x : t.data) x = rng.normal() * scale;
    }
  });
  return p;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& other) {
  EncoderParams g = other;
  g.for_each_tensor([](const std::string&, Tensor& t) { t.zero(); });
  return g;
}

namespace {

std::vector<int32_t> effective_tokens(const EncoderParams& p, std::vector<int32_t> toks) {
  if (toks.empty()) toks.push_back(Vocabulary::kEmpty);
  if (p.config.kind == EncoderKind::tiny_transformer &&
      toks.size() > static_cast<size_t>(p.config.max_len)) {
    toks.resize(p.config.max_len);
  }
  for (int32_t t : toks) {
    if (t < 0 || t >= p.config.vocab_size)
      throw DataError("encoder: token id out of vocabulary range");
  }
  return toks;
}

void add_row(Tensor& t, int row, const double* src, double scale) {
  double* dst = t.row_ptr(row);
  for (int j = 0; j < t.cols; ++j) dst[j] += src[j] * scale;
}

// y = x * w + b, b broadcast over rows.
void affine(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
  matmul(x, w, y);
  for (int i = 0; i < y.rows; ++i) add_row(y, i, b.row_ptr(0), 1.0);
}

void softmax_rows(Tensor& t) {
  for (int i = 0; i < t.rows; ++i) {
    double* r = t.row_ptr(i);
    double mx = r[0];
    for (int j = 1; j < t.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < t.cols; ++j) r[j] /= sum;
  }
}

constexpr double kLnEps = 1e-5;

// hat = (x - mean)/sqrt(var + eps) per row; y = hat*gain + bias.
void layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Tensor& hat,
                std::vector<double>& inv_std, Tensor& y) {
  const int n = x.rows, d = x.cols;
  hat = Tensor(n, d);
  y = Tensor(n, d);
  inv_std.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* r = x.row_ptr(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += r[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (r[j] - mean) * (r[j] - mean);
    var /= d;
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std[i] = is;
    for (int j = 0; j < d; ++j) {
      hat(i, j) = (r[j] - mean) * is;
      y(i, j) = hat(i, j) * gain(0, j) + bias(0, j);
    }
  }
}

// Given dy, accumulates dgain/dbias and returns dx.
Tensor layer_norm_backward(const Tensor& dy, const Tensor& hat,
                           const std::vector<double>& inv_std, const Tensor& gain,
                           Tensor& dgain, Tensor& dbias) {
  const int n = dy.rows, d = dy.cols;
  Tensor dx(n, d);
  for (int i = 0; i < n; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_hat = 0.0;
    for (int j = 0; j < d; ++j) {
      const double dxh = dy(i, j) * gain(0, j);
      mean_dxhat += dxh;
      mean_dxhat_hat += dxh * hat(i, j);
      dgain(0, j) += dy(i, j) * hat(i, j);
      dbias(0, j) += dy(i, j);
    }
    mean_dxhat /= d;
    mean_dxhat_hat /= d;
    for (int j = 0; j < d; ++j) {
      const double dxh = dy(i, j) * gain(0, j);
      dx(i, j) = (dxh - mean_dxhat - hat(i, j) * mean_dxhat_hat) * inv_std[i];
    }
  }
  return dx;
}

Tensor head_slice(const Tensor& t, int h, int dk) {
  Tensor s(t.rows, dk);
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < dk; ++j) s(i, j) = t(i, h * dk + j);
  return s;
}

void head_unslice_add(Tensor& t, const Tensor& s, int h, int dk) {
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < dk; ++j) t(i, h * dk + j) += s(i, j);
}

Tensor encode_boe(const EncoderParams& p, const std::vector<int32_t>& toks, EncodeCache* cache) {
  const int d = p.config.dim;
  Tensor mean(1, d);
  for (int32_t t : toks) add_row(mean, 0, p.token_embedding.row_ptr(t), 1.0);
  const double inv = 1.0 / static_cast<double>(toks.size());
  for (double& x : mean.data) x *= inv;
  Tensor pre(1, d);
  affine(mean, p.proj_w, p.proj_b, pre);
  Tensor out(1, d);
  for (int j = 0; j < d; ++j) out(0, j) = std::tanh(pre(0, j));
  if (cache) {
    cache->mean = mean;
    cache->pre_act = pre;
    cache->out = out;
  }
  return out;
}

Tensor encode_transformer(const EncoderParams& p, const std::vector<int32_t>& toks,
                          EncodeCache* cache) {
  const int d = p.config.dim;
  const int n = static_cast<int>(toks.size());
  const int heads = p.config.heads;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor x(n, d);
  for (int i = 0; i < n; ++i) {
    const double* e = p.token_embedding.row_ptr(toks[i]);
    const double* pos = p.pos_embedding.row_ptr(i);
    for (int j = 0; j < d; ++j) x(i, j) = e[j] + pos[j];
  }
  if (cache) {
    cache->x0 = x;
    cache->layers.assign(p.layers.size(), {});
  }

  for (size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    TransformerLayerCache local;
    TransformerLayerCache& C = cache ? cache->layers[l] : local;
    C.x_in = x;

    affine(x, L.wq, L.bq, C.q);
    affine(x, L.wk, L.bk, C.k);
    affine(x, L.wv, L.bv, C.v);

    C.attn.assign(heads, Tensor());
    C.concat = Tensor(n, d);
    for (int h = 0; h < heads; ++h) {
      Tensor qh = head_slice(C.q, h, dk);
      Tensor kh = head_slice(C.k, h, dk);
      Tensor vh = head_slice(C.v, h, dk);
      Tensor s(n, n);
      matmul_nt(qh, kh, s);
      for (double& v : s.data) v *= scale;
      softmax_rows(s);
      C.attn[h] = s;
      Tensor oh(n, dk);
      matmul(s, vh, oh);
      head_unslice_add(C.concat, oh, h, dk);
    }

    Tensor attn_out(n, d);
    affine(C.concat, L.wo, L.bo, attn_out);
    C.sum1 = Tensor(n, d);
    for (size_t i = 0; i < C.sum1.data.size(); ++i)
      C.sum1.data[i] = x.data[i] + attn_out.data[i];
    layer_norm(C.sum1, L.ln1_gain, L.ln1_bias, C.norm1_hat, C.inv_std1, C.x1);

    C.ffn_pre = Tensor(n, p.config.ffn);
    affine(C.x1, L.w1, L.b1, C.ffn_pre);
    C.ffn_act = C.ffn_pre;
    for (double& v : C.ffn_act.data) v = gelu(v);
    Tensor ffn_out(n, d);
    affine(C.ffn_act, L.w2, L.b2, ffn_out);
    C.sum2 = Tensor(n, d);
    for (size_t i = 0; i < C.sum2.data.size(); ++i)
      C.sum2.data[i] = C.x1.data[i] + ffn_out.data[i];
    layer_norm(C.sum2, L.ln2_gain, L.ln2_bias, C.norm2_hat, C.inv_std2, C.x2);
    x = C.x2;
  }

  Tensor out(1, d);
  const double inv = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) add_row(out, 0, x.row_ptr(i), inv);
  if (cache) cache->out = out;
  return out;
}

}  // namespace

Tensor encode(const EncoderParams& params, const std::vector<int32_t>& tokens,
              EncodeCache* cache) {
  auto toks = effective_tokens(params, tokens);
  if (cache) {
    *cache = EncodeCache{};
    cache->tokens = toks;
  }
  switch (params.config.kind) {
    case EncoderKind::bag_of_embeddings: return encode_boe(params, toks, cache);
    case EncoderKind::tiny_transformer: return encode_transformer(params, toks, cache);
    default: throw ConfigError("encoder: tfidf kind cannot encode");
  }
}

namespace {

void backward_boe(const EncoderParams& p, const EncodeCache& c, const Tensor& dout,
                  EncoderParams& grad) {
  const int d = p.config.dim;
  Tensor dpre(1, d);
  for (int j = 0; j < d; ++j) dpre(0, j) = dout(0, j) * (1.0 - c.out(0, j) * c.out(0, j));
  for (int j = 0; j < d; ++j) grad.proj_b(0, j) += dpre(0, j);
  matmul_tn(c.mean, dpre, grad.proj_w, true);
  Tensor dmean(1, d);
  matmul_nt(dpre, p.proj_w, dmean);
  const double inv = 1.0 / static_cast<double>(c.tokens.size());
  for (int32_t t : c.tokens) add_row(grad.token_embedding, t, dmean.row_ptr(0), inv);
}

void backward_transformer(const EncoderParams& p, const EncodeCache& c, const Tensor& dout,
                          EncoderParams& grad) {
  const int d = p.config.dim;
  const int n = static_cast<int>(c.tokens.size());
  const int heads = p.config.heads;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor dx(n, d);
  const double inv = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) dx(i, j) = dout(0, j) * inv;

  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const auto& L = p.layers[l];
    const auto& C = c.layers[l];
    auto& G = grad.layers[l];

    Tensor dsum2 = layer_norm_backward(dx, C.norm2_hat, C.inv_std2, L.ln2_gain,
                                       G.ln2_gain, G.ln2_bias);
    // sum2 = x1 + ffn_out
    Tensor dx1 = dsum2;
    matmul_tn(C.ffn_act, dsum2, G.w2, true);
    for (int i = 0; i < n; ++i) add_row(G.b2, 0, dsum2.row_ptr(i), 1.0);
    Tensor dact(n, p.config.ffn);
    matmul_nt(dsum2, L.w2, dact);
    for (size_t i = 0; i < dact.data.size(); ++i) dact.data[i] *= gelu_grad(C.ffn_pre.data[i]);
    matmul_tn(C.x1, dact, G.w1, true);
    for (int i = 0; i < n; ++i) add_row(G.b1, 0, dact.row_ptr(i), 1.0);
    matmul_nt(dact, L.w1, dx1, true);

    Tensor dsum1 = layer_norm_backward(dx1, C.norm1_hat, C.inv_std1, L.ln1_gain,
                                       G.ln1_gain, G.ln1_bias);
    // sum1 = x_in + attn_out
    Tensor dx_in = dsum1;
    matmul_tn(C.concat, dsum1, G.wo, true);
    for (int i = 0; i < n; ++i) add_row(G.bo, 0, dsum1.row_ptr(i), 1.0);
    Tensor dconcat(n, d);
    matmul_nt(dsum1, L.wo, dconcat);

    Tensor dq(n, d), dkt(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
      Tensor doh = head_slice(dconcat, h, dk);
      Tensor vh = head_slice(C.v, h, dk);
      Tensor qh = head_slice(C.q, h, dk);
      Tensor kh = head_slice(C.k, h, dk);
      const Tensor& a = C.attn[h];
      Tensor da(n, n);
      matmul_nt(doh, vh, da);
      Tensor dvh(n, dk);
      matmul_tn(a, doh, dvh);
      // softmax rows backward
      Tensor ds(n, n);
      for (int i = 0; i < n; ++i) {
        double dotv = 0.0;
        for (int j = 0; j < n; ++j) dotv += da(i, j) * a(i, j);
        for (int j = 0; j < n; ++j) ds(i, j) = a(i, j) * (da(i, j) - dotv);
      }
      for (double& v : ds.data) v *= scale;
      Tensor dqh(n, dk), dkh(n, dk);
      matmul(ds, kh, dqh);
      matmul_tn(ds, qh, dkh);
      head_unslice_add(dq, dqh, h, dk);
      head_unslice_add(dkt, dkh, h, dk);
      head_unslice_add(dv, dvh, h, dk);
    }

    matmul_tn(C.x_in, dq, G.wq, true);
    matmul_tn(C.x_in, dkt, G.wk, true);
    matmul_tn(C.x_in, dv, G.wv, true);
    for (int i = 0; i < n; ++i) {
      add_row(G.bq, 0, dq.row_ptr(i), 1.0);
      add_row(G.bk, 0, dkt.row_ptr(i), 1.0);
      add_row(G.bv, 0, dv.row_ptr(i), 1.0);
    }
    matmul_nt(dq, L.wq, dx_in, true);
    matmul_nt(dkt, L.wk, dx_in, true);
    matmul_nt(dv, L.wv, dx_in, true);
    dx = dx_in;
  }

  for (int i = 0; i < n; ++i) {
    add_row(grad.token_embedding, c.tokens[i], dx.row_ptr(i), 1.0);
    add_row(grad.pos_embedding, i, dx.row_ptr(i), 1.0);
  }
}

}  // namespace

void encode_backward(const EncoderParams& params, const EncodeCache& cache,
                     const Tensor& dout, EncoderParams& grad) {
  if (dout.rows != 1 || dout.cols != params.config.dim)
    throw DataError("encoder: dout shape mismatch");
  if (params.config.kind == EncoderKind::bag_of_embeddings) {
    backward_boe(params, cache, dout, grad);
  } else {
    backward_transformer(params, cache, dout, grad);
  }
}

}  // namespace ztc
