#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/tensor.hpp"

namespace hsd::encoder {

struct ConvSpec {
  std::size_t width = 0;
  std::size_t filters = 0;
};

struct CharCnnConfig {
  std::size_t char_embed_dim = 16;
  std::vector<ConvSpec> convolutions = {{1, 8}, {2, 8}, {3, 16}, {4, 16}};
  std::size_t highway_layers = 1;
  std::size_t output_dim = 128;
  std::size_t max_token_chars = 24;

  std::size_t total_filters() const;
  void validate() const;
};

struct CharCnnCache {
  std::vector<std::size_t> char_ids;
  // Per convolution, per filter: position whose window won the max-pool.
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<double> pooled;
  // Highway intermediates per layer: input s, transform gate t, candidate g.
  std::vector<std::vector<double>> hw_in, hw_t, hw_g;
  std::vector<double> hw_out;
};

// Bytes 0..255 plus word-boundary and padding markers.
inline constexpr std::size_t kCharBow = 256;
inline constexpr std::size_t kCharEow = 257;
inline constexpr std::size_t kCharPad = 258;
inline constexpr std::size_t kCharTableSize = 259;

class CharCnnEmbedder {
 public:
  CharCnnEmbedder() = default;
  CharCnnEmbedder(const CharCnnConfig& cfg, Rng& rng);

  const CharCnnConfig& config() const { return cfg_; }

  // Deterministic: depends only on the token bytes and the parameters.
  std::vector<double> embed(const std::string& token, CharCnnCache* cache) const;
  void backward(const CharCnnCache& cache, const double* dout);

  std::vector<Param*> params();

 private:
  CharCnnConfig cfg_;
  Param char_embed_;
  std::vector<Param> conv_w_, conv_b_;
  std::vector<Param> hw_wt_, hw_bt_, hw_wg_, hw_bg_;
  Param proj_w_, proj_b_;
};

}  // namespace hsd::encoder
