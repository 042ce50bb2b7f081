#include "hsd/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd::encoder {

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::SmallTransformer: return "small-transformer";
    case BackboneKind::CharCnnTransformer: return "char-cnn+small-transformer";
    case BackboneKind::ExternalEmbeddings: return "external-embeddings";
  }
  return "?";
}

std::string to_string(Pooling pooling) {
  return pooling == Pooling::Mean ? "mean" : "cls";
}

BackboneKind backbone_kind_from_string(const std::string& s) {
  if (s == "small-transformer") return BackboneKind::SmallTransformer;
  if (s == "char-cnn+small-transformer") return BackboneKind::CharCnnTransformer;
  if (s == "external-embeddings") return BackboneKind::ExternalEmbeddings;
  throw ConfigError("unknown backbone kind: " + s);
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "cls") return Pooling::Cls;
  throw ConfigError("unknown pooling: " + s + " (expected mean or cls)");
}

void BackboneConfig::validate() const {
  if (dim == 0) throw ConfigError("backbone dim must be positive");
  if (kind == BackboneKind::ExternalEmbeddings) return;
  if (layers == 0) throw ConfigError("backbone needs at least one layer");
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("backbone dim must be divisible by the head count");
  if (ff_dim == 0) throw ConfigError("feed-forward dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (kind == BackboneKind::SmallTransformer && vocab_size < 4)
    throw ConfigError("subword backbone requires a vocabulary");
  if (kind == BackboneKind::CharCnnTransformer) {
    char_cnn.validate();
    if (char_cnn.output_dim != dim)
      throw ConfigError("char cnn output_dim must match backbone dim");
  }
}

std::size_t EncoderOutput::real_len() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  return n;
}

std::vector<double> sinusoidal_position(std::size_t pos, std::size_t dim) {
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim; i += 2) {
    const double angle =
        static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / dim);
    out[i] = std::sin(angle);
    if (i + 1 < dim) out[i + 1] = std::cos(angle);
  }
  return out;
}

namespace {

constexpr double kLnEps = 1e-5;

// y = x @ w + b over the n rows actually used.
void matmul_rows(const Tensor& x, std::size_t n, const Tensor& w, const Tensor* b, Tensor& y) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t r = 0; r < n; ++r) {
    double* yr = &y.v[r * out];
    if (b) {
      for (std::size_t j = 0; j < out; ++j) yr[j] = b->v[j];
    } else {
      for (std::size_t j = 0; j < out; ++j) yr[j] = 0.0;
    }
    const double* xr = &x.v[r * in];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wr = &w.v[i * out];
      for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wr[j];
    }
  }
}

// dW += x^T dy, db += colsum(dy), dx += dy @ w^T, over n rows.
void matmul_rows_backward(const Tensor& x, std::size_t n, const Tensor& w, Tensor& dw, Tensor& db,
                          const Tensor& dy, Tensor* dx) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = &dy.v[r * out];
    const double* xr = &x.v[r * in];
    for (std::size_t j = 0; j < out; ++j) db.v[j] += dyr[j];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      double* dwr = &dw.v[i * out];
      double acc = 0.0;
      const double* wr = &w.v[i * out];
      for (std::size_t j = 0; j < out; ++j) {
        dwr[j] += xi * dyr[j];
        acc += wr[j] * dyr[j];
      }
      if (dx) dx->v[r * in + i] += acc;
    }
  }
}

void layer_norm_forward(const Tensor& x, std::size_t n, const Tensor& gamma, const Tensor& beta,
                        Tensor& y, LayerNormCache& cache) {
  const std::size_t d = gamma.size();
  cache.inv_std.assign(n, 0.0);
  cache.xhat = Tensor({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = &x.v[r * d];
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mean) * inv;
      cache.xhat.v[r * d + j] = xh;
      y.v[r * d + j] = gamma.v[j] * xh + beta.v[j];
    }
  }
}

void layer_norm_backward(const LayerNormCache& cache, std::size_t n, const Tensor& gamma,
                         Tensor& dgamma, Tensor& dbeta, const Tensor& dy, Tensor& dx) {
  const std::size_t d = gamma.size();
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = &dy.v[r * d];
    const double* xh = &cache.xhat.v[r * d];
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double gdy = gamma.v[j] * dyr[j];
      sum_g += gdy;
      sum_gx += gdy * xh[j];
      dgamma.v[j] += dyr[j] * xh[j];
      dbeta.v[j] += dyr[j];
    }
    const double inv = cache.inv_std[r];
    const double mg = sum_g / static_cast<double>(d);
    const double mgx = sum_gx / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx.v[r * d + j] += (gamma.v[j] * dyr[j] - mg - xh[j] * mgx) * inv;
    }
  }
}

}  // namespace

Encoder::Encoder(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.kind == BackboneKind::ExternalEmbeddings) return;
  const std::size_t d = cfg_.dim;
  if (cfg_.kind == BackboneKind::SmallTransformer) {
    tok_embed_.name = "embed.tok";
    tok_embed_.group = "embed";
    tok_embed_.w = Tensor({cfg_.vocab_size, d});
    tok_embed_.g = tok_embed_.w;
    init_uniform_fan_in(tok_embed_.w, d, rng);
  } else {
    CharCnnConfig cc = cfg_.char_cnn;
    cc.output_dim = d;
    char_cnn_.emplace(cc, rng);
  }
  layers_.resize(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    Layer& lay = layers_[l];
    const std::string base = "enc." + std::to_string(l) + ".";
    const std::string group = "enc." + std::to_string(l);
    auto make = [&](Param& p, const std::string& leaf, std::vector<std::size_t> shape,
                    std::size_t fan_in) {
      p.name = base + leaf;
      p.group = group;
      p.w = Tensor(std::move(shape));
      p.g = p.w;
      if (fan_in) init_uniform_fan_in(p.w, fan_in, rng);
    };
    make(lay.wq, "attn.wq", {d, d}, d);
    make(lay.bq, "attn.bq", {d}, 0);
    make(lay.wk, "attn.wk", {d, d}, d);
    make(lay.bk, "attn.bk", {d}, 0);
    make(lay.wv, "attn.wv", {d, d}, d);
    make(lay.bv, "attn.bv", {d}, 0);
    make(lay.wo, "attn.wo", {d, d}, d);
    make(lay.bo, "attn.bo", {d}, 0);
    make(lay.ln1_g, "ln1.gamma", {d}, 0);
    make(lay.ln1_b, "ln1.beta", {d}, 0);
    lay.ln1_g.w.fill(1.0);
    make(lay.ffn_w1, "ffn.w1", {d, cfg_.ff_dim}, d);
    make(lay.ffn_b1, "ffn.b1", {cfg_.ff_dim}, 0);
    make(lay.ffn_w2, "ffn.w2", {cfg_.ff_dim, d}, cfg_.ff_dim);
    make(lay.ffn_b2, "ffn.b2", {d}, 0);
    make(lay.ln2_g, "ln2.gamma", {d}, 0);
    make(lay.ln2_b, "ln2.beta", {d}, 0);
    lay.ln2_g.w.fill(1.0);
  }
}

Tensor Encoder::embed_tokens(const TokenSequence& seq, std::size_t n, EncoderCache* cache) const {
  const std::size_t d = cfg_.dim;
  Tensor x({n, d});
  if (cfg_.kind == BackboneKind::SmallTransformer) {
    if (seq.ids.size() < n) throw ConfigError("token sequence lacks ids for the subword backbone");
    for (std::size_t r = 0; r < n; ++r) {
      const int id = seq.ids[r];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
        throw ConfigError("token id out of vocabulary range");
      const double* e = &tok_embed_.w.v[static_cast<std::size_t>(id) * d];
      for (std::size_t j = 0; j < d; ++j) x.v[r * d + j] = e[j];
    }
    if (cache) cache->ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<long>(n));
  } else {
    if (seq.tokens.size() < n)
      throw ConfigError("token sequence lacks token strings for the character backbone");
    if (cache) cache->char_caches.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      CharCnnCache* cc = cache ? &cache->char_caches[r] : nullptr;
      std::vector<double> e = char_cnn_->embed(seq.tokens[r], cc);
      for (std::size_t j = 0; j < d; ++j) x.v[r * d + j] = e[j];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const std::vector<double> pe = sinusoidal_position(r, d);
    for (std::size_t j = 0; j < d; ++j) x.v[r * d + j] += pe[j];
  }
  return x;
}

EncoderOutput Encoder::forward(const TokenSequence& seq, Mode mode, Rng* rng,
                               EncoderCache* cache) const {
  if (cfg_.kind == BackboneKind::ExternalEmbeddings)
    throw ConfigError("external-embeddings backbone takes vectors, not token sequences");
  if (mode == Mode::Train && cfg_.dropout > 0.0 && !rng)
    throw ConfigError("train-mode forward needs an rng for dropout");

  const std::size_t d = cfg_.dim;
  const std::size_t dh = d / cfg_.heads;
  const std::size_t max_len = seq.max_len();
  const std::size_t n = seq.real_len;
  if (n == 0) throw ConfigError("sequence has no real tokens");

  Tensor x = embed_tokens(seq, n, cache);
  std::vector<double> embed_drop;
  apply_dropout(x.v.data(), n * d, cfg_.dropout, mode, rng, &embed_drop);
  if (cache) {
    cache->n = n;
    cache->embedded = x;
    cache->embed_drop = std::move(embed_drop);
    cache->layers.assign(cfg_.layers, LayerCache{});
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Layer& lay = layers_[l];
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->x_in = x;

    Tensor q({n, d}), k({n, d}), v({n, d});
    matmul_rows(x, n, lay.wq.w, &lay.bq.w, q);
    matmul_rows(x, n, lay.wk.w, &lay.bk.w, k);
    matmul_rows(x, n, lay.wv.w, &lay.bv.w, v);

    Tensor ctx({n, d});
    std::vector<Tensor> att(cfg_.heads, Tensor({n, n}));
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const std::size_t off = h * dh;
      Tensor& a = att[h];
      for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          const double* qi = &q.v[i * d + off];
          const double* kj = &k.v[j * d + off];
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= scale;
          a.v[i * n + j] = s;
          if (s > mx) mx = s;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double e = std::exp(a.v[i * n + j] - mx);
          a.v[i * n + j] = e;
          sum += e;
        }
        for (std::size_t j = 0; j < n; ++j) a.v[i * n + j] /= sum;
        double* ci = &ctx.v[i * d + off];
        for (std::size_t c = 0; c < dh; ++c) ci[c] = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double w = a.v[i * n + j];
          const double* vj = &v.v[j * d + off];
          for (std::size_t c = 0; c < dh; ++c) ci[c] += w * vj[c];
        }
      }
    }

    Tensor attn_out({n, d});
    matmul_rows(ctx, n, lay.wo.w, &lay.bo.w, attn_out);
    if (lc) {
      lc->q = q;
      lc->k = k;
      lc->v = v;
      lc->att = att;
      lc->ctx = ctx;
      lc->attn_out = attn_out;
    }
    std::vector<double> attn_drop;
    apply_dropout(attn_out.v.data(), n * d, cfg_.dropout, mode, rng, &attn_drop);

    Tensor res1({n, d});
    for (std::size_t i = 0; i < n * d; ++i) res1.v[i] = x.v[i] + attn_out.v[i];
    Tensor u({n, d});
    LayerNormCache ln1;
    layer_norm_forward(res1, n, lay.ln1_g.w, lay.ln1_b.w, u, ln1);

    Tensor ffn_pre({n, cfg_.ff_dim});
    matmul_rows(u, n, lay.ffn_w1.w, &lay.ffn_b1.w, ffn_pre);
    Tensor ffn_act = ffn_pre;
    for (double& t : ffn_act.v) t = t > 0.0 ? t : 0.0;
    Tensor ffn_out({n, d});
    matmul_rows(ffn_act, n, lay.ffn_w2.w, &lay.ffn_b2.w, ffn_out);
    if (lc) {
      lc->attn_drop = std::move(attn_drop);
      lc->res1 = res1;
      lc->ln1 = ln1;
      lc->u = u;
      lc->ffn_pre = ffn_pre;
      lc->ffn_act = ffn_act;
      lc->ffn_out = ffn_out;
    }
    std::vector<double> ffn_drop;
    apply_dropout(ffn_out.v.data(), n * d, cfg_.dropout, mode, rng, &ffn_drop);

    Tensor res2({n, d});
    for (std::size_t i = 0; i < n * d; ++i) res2.v[i] = u.v[i] + ffn_out.v[i];
    Tensor y({n, d});
    LayerNormCache ln2;
    layer_norm_forward(res2, n, lay.ln2_g.w, lay.ln2_b.w, y, ln2);
    if (lc) {
      lc->ffn_drop = std::move(ffn_drop);
      lc->res2 = res2;
      lc->ln2 = ln2;
    }
    x = std::move(y);
  }
  if (cache) cache->h_final = x;

  EncoderOutput out;
  out.h = Tensor({max_len, d});
  for (std::size_t i = 0; i < n * d; ++i) out.h.v[i] = x.v[i];
  out.mask = seq.mask;
  out.pooled.assign(d, 0.0);
  if (cfg_.pooling == Pooling::Cls) {
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] = x.v[j];
  } else {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) out.pooled[j] += x.v[r * d + j];
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] /= static_cast<double>(n);
  }
  return out;
}

void Encoder::backward(const EncoderCache& cache, const Tensor* dh,
                       const std::vector<double>* dpooled) {
  const std::size_t d = cfg_.dim;
  const std::size_t dh_dim = d / cfg_.heads;
  const std::size_t n = cache.n;

  Tensor dx({n, d});
  if (dh) {
    for (std::size_t i = 0; i < n * d; ++i) dx.v[i] = dh->v[i];
  }
  if (dpooled) {
    if (cfg_.pooling == Pooling::Cls) {
      for (std::size_t j = 0; j < d; ++j) dx.v[j] += (*dpooled)[j];
    } else {
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) dx.v[r * d + j] += (*dpooled)[j] * inv;
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh_dim));
  for (std::size_t l = cfg_.layers; l-- > 0;) {
    Layer& lay = layers_[l];
    const LayerCache& lc = cache.layers[l];

    // layer output = ln2(res2)
    Tensor dres2({n, d});
    layer_norm_backward(lc.ln2, n, lay.ln2_g.w, lay.ln2_g.g, lay.ln2_b.g, dx, dres2);

    Tensor du = dres2;
    Tensor dffn_out = dres2;
    apply_dropout_mask(dffn_out.v.data(), lc.ffn_drop);

    Tensor dffn_act({n, cfg_.ff_dim});
    matmul_rows_backward(lc.ffn_act, n, lay.ffn_w2.w, lay.ffn_w2.g, lay.ffn_b2.g, dffn_out,
                         &dffn_act);
    for (std::size_t i = 0; i < n * cfg_.ff_dim; ++i)
      if (lc.ffn_pre.v[i] <= 0.0) dffn_act.v[i] = 0.0;
    matmul_rows_backward(lc.u, n, lay.ffn_w1.w, lay.ffn_w1.g, lay.ffn_b1.g, dffn_act, &du);

    Tensor dres1({n, d});
    layer_norm_backward(lc.ln1, n, lay.ln1_g.w, lay.ln1_g.g, lay.ln1_b.g, du, dres1);

    dx = dres1;
    Tensor dattn_out = dres1;
    apply_dropout_mask(dattn_out.v.data(), lc.attn_drop);

    Tensor dctx({n, d});
    matmul_rows_backward(lc.ctx, n, lay.wo.w, lay.wo.g, lay.bo.g, dattn_out, &dctx);

    Tensor dq({n, d}), dk({n, d}), dv({n, d});
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const std::size_t off = h * dh_dim;
      const Tensor& a = lc.att[h];
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> datt(n, 0.0);
        const double* dci = &dctx.v[i * d + off];
        for (std::size_t j = 0; j < n; ++j) {
          const double* vj = &lc.v.v[j * d + off];
          double acc = 0.0;
          for (std::size_t c = 0; c < dh_dim; ++c) acc += dci[c] * vj[c];
          datt[j] = acc;
          const double w = a.v[i * n + j];
          double* dvj = &dv.v[j * d + off];
          for (std::size_t c = 0; c < dh_dim; ++c) dvj[c] += w * dci[c];
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += a.v[i * n + j] * datt[j];
        for (std::size_t j = 0; j < n; ++j) {
          const double ds = a.v[i * n + j] * (datt[j] - dot) * scale;
          const double* kj = &lc.k.v[j * d + off];
          const double* qi = &lc.q.v[i * d + off];
          double* dqi = &dq.v[i * d + off];
          double* dkj = &dk.v[j * d + off];
          for (std::size_t c = 0; c < dh_dim; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
    matmul_rows_backward(lc.x_in, n, lay.wq.w, lay.wq.g, lay.bq.g, dq, &dx);
    matmul_rows_backward(lc.x_in, n, lay.wk.w, lay.wk.g, lay.bk.g, dk, &dx);
    matmul_rows_backward(lc.x_in, n, lay.wv.w, lay.wv.g, lay.bv.g, dv, &dx);
  }

  apply_dropout_mask(dx.v.data(), cache.embed_drop);
  if (cfg_.kind == BackboneKind::SmallTransformer) {
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t id = static_cast<std::size_t>(cache.ids[r]);
      double* gr = &tok_embed_.g.v[id * d];
      for (std::size_t j = 0; j < d; ++j) gr[j] += dx.v[r * d + j];
    }
  } else {
    for (std::size_t r = 0; r < n; ++r)
      char_cnn_->backward(cache.char_caches[r], &dx.v[r * d]);
  }
}

std::vector<Param*> Encoder::params() {
  std::vector<Param*> out;
  if (cfg_.kind == BackboneKind::ExternalEmbeddings) return out;
  if (cfg_.kind == BackboneKind::SmallTransformer) {
    out.push_back(&tok_embed_);
  } else {
    for (Param* p : char_cnn_->params()) out.push_back(p);
  }
  for (Layer& lay : layers_) {
    for (Param* p : {&lay.wq, &lay.bq, &lay.wk, &lay.bk, &lay.wv, &lay.bv, &lay.wo, &lay.bo,
                     &lay.ln1_g, &lay.ln1_b, &lay.ffn_w1, &lay.ffn_b1, &lay.ffn_w2, &lay.ffn_b2,
                     &lay.ln2_g, &lay.ln2_b})
      out.push_back(p);
  }
  return out;
}

std::vector<std::string> Encoder::layer_groups() const {
  std::vector<std::string> out;
  if (cfg_.kind == BackboneKind::ExternalEmbeddings) return out;
  for (std::size_t l = cfg_.layers; l-- > 0;) out.push_back("enc." + std::to_string(l));
  out.push_back("embed");
  return out;
}

EncoderOutput encode_external(const Tensor& rows, std::size_t max_len, Pooling pooling) {
  if (rows.shape.size() != 2) throw ConfigError("external embeddings must be a 2-d matrix");
  const std::size_t n = rows.shape[0], d = rows.shape[1];
  if (n == 0) throw ConfigError("external embeddings must contain at least one row");
  if (n > max_len) throw ConfigError("external embeddings exceed max_len");
  EncoderOutput out;
  out.h = Tensor({max_len, d});
  for (std::size_t i = 0; i < n * d; ++i) out.h.v[i] = rows.v[i];
  out.mask.assign(max_len, 0);
  for (std::size_t r = 0; r < n; ++r) out.mask[r] = 1;
  out.pooled.assign(d, 0.0);
  if (pooling == Pooling::Cls) {
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] = rows.v[j];
  } else {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j) out.pooled[j] += rows.v[r * d + j];
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] /= static_cast<double>(n);
  }
  return out;
}

Tensor load_external_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);
  std::size_t n = 0, d = 0;
  if (!(in >> n >> d) || n == 0 || d == 0)
    throw IoError("embeddings file needs a `n d` header: " + path);
  Tensor rows({n, d});
  for (std::size_t i = 0; i < n * d; ++i) {
    if (!(in >> rows.v[i]))
      throw IoError("embeddings file truncated, expected " + std::to_string(n * d) + " values: " +
                    path);
  }
  return rows;
}

}  // namespace hsd::encoder
