#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hsd/charcnn.hpp"
#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/tensor.hpp"
#include "hsd/tokenizer.hpp"

namespace hsd::encoder {

enum class BackboneKind { SmallTransformer, CharCnnTransformer, ExternalEmbeddings };
enum class Pooling { Mean, Cls };

std::string to_string(BackboneKind kind);
std::string to_string(Pooling pooling);
BackboneKind backbone_kind_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::SmallTransformer;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t dim = 128;
  std::size_t ff_dim = 256;
  double dropout = 0.1;
  Pooling pooling = Pooling::Mean;
  std::size_t vocab_size = 0;
  CharCnnConfig char_cnn;

  void validate() const;
};

struct EncoderOutput {
  Tensor h;                         // max_len x d, zero rows at padded positions
  std::vector<double> pooled;       // d
  std::vector<std::uint8_t> mask;

  std::size_t real_len() const;
};

struct LayerNormCache {
  std::vector<double> inv_std;  // per row
  Tensor xhat;
};

struct LayerCache {
  Tensor x_in;
  Tensor q, k, v;
  std::vector<Tensor> att;  // per head, n x n
  Tensor ctx;
  Tensor attn_out;
  std::vector<double> attn_drop;
  Tensor res1;
  LayerNormCache ln1;
  Tensor u;
  Tensor ffn_pre;
  Tensor ffn_act;
  Tensor ffn_out;
  std::vector<double> ffn_drop;
  Tensor res2;
  LayerNormCache ln2;
};

struct EncoderCache {
  std::size_t n = 0;
  std::vector<int> ids;
  std::vector<CharCnnCache> char_caches;
  Tensor embedded;  // n x d, after position encoding and dropout
  std::vector<double> embed_drop;
  std::vector<LayerCache> layers;
  Tensor h_final;   // n x d
};

// Post-norm transformer over the real-token prefix; padded positions are
// never touched. Copyable so training can snapshot the best epoch.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const BackboneConfig& cfg, Rng& rng);

  const BackboneConfig& config() const { return cfg_; }

  EncoderOutput forward(const TokenSequence& seq, Mode mode, Rng* rng, EncoderCache* cache) const;

  // dh: gradient w.r.t. the first cache.n rows of H (may be null).
  // dpooled: gradient w.r.t. the pooled vector (may be null).
  void backward(const EncoderCache& cache, const Tensor* dh, const std::vector<double>* dpooled);

  std::vector<Param*> params();
  // Unfreezing granularity, input-most last: enc.<L-1>, ..., enc.0, embed.
  std::vector<std::string> layer_groups() const;

 private:
  Tensor embed_tokens(const TokenSequence& seq, std::size_t n, EncoderCache* cache) const;

  BackboneConfig cfg_;
  Param tok_embed_;
  std::optional<CharCnnEmbedder> char_cnn_;

  struct Layer {
    Param wq, bq, wk, bk, wv, bv, wo, bo;
    Param ln1_g, ln1_b;
    Param ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Param ln2_g, ln2_b;
  };
  std::vector<Layer> layers_;
};

// External-embeddings adapter: H is taken row-for-row from caller-provided
// vectors, no trainable parameters involved.
EncoderOutput encode_external(const Tensor& rows, std::size_t max_len, Pooling pooling);

// File format: header line "n d", then n whitespace-separated d-vectors.
Tensor load_external_embeddings(const std::string& path);

std::vector<double> sinusoidal_position(std::size_t pos, std::size_t dim);

}  // namespace hsd::encoder
