#include "hsd/charcnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsd/errors.hpp"

namespace hsd::encoder {

std::size_t CharCnnConfig::total_filters() const {
  std::size_t total = 0;
  for (const auto& c : convolutions) total += c.filters;
  return total;
}

void CharCnnConfig::validate() const {
  if (char_embed_dim == 0) throw ConfigError("char_embed_dim must be positive");
  if (output_dim == 0) throw ConfigError("char cnn output_dim must be positive");
  if (convolutions.empty()) throw ConfigError("char cnn needs at least one convolution");
  for (const auto& c : convolutions) {
    if (c.width == 0 || c.filters == 0)
      throw ConfigError("convolution width and filter count must be positive");
    if (c.width > max_token_chars)
      throw ConfigError("convolution width exceeds max_token_chars");
  }
  if (max_token_chars < 3)
    throw ConfigError("max_token_chars must fit boundary markers plus one byte");
}

namespace {

std::vector<std::size_t> token_char_ids(const std::string& token, std::size_t max_chars) {
  std::vector<std::size_t> ids;
  ids.reserve(max_chars);
  ids.push_back(kCharBow);
  for (unsigned char b : token) {
    if (ids.size() + 1 >= max_chars) break;
    ids.push_back(static_cast<std::size_t>(b));
  }
  ids.push_back(kCharEow);
  while (ids.size() < max_chars) ids.push_back(kCharPad);
  return ids;
}

}  // namespace

CharCnnEmbedder::CharCnnEmbedder(const CharCnnConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  auto make = [&](Param& p, const std::string& name, std::vector<std::size_t> shape,
                  std::size_t fan_in) {
    p.name = name;
    p.group = "embed";
    p.w = Tensor(std::move(shape));
    p.g = p.w;
    if (fan_in) init_uniform_fan_in(p.w, fan_in, rng);
  };
  make(char_embed_, "embed.char", {kCharTableSize, cfg_.char_embed_dim}, cfg_.char_embed_dim);
  conv_w_.resize(cfg_.convolutions.size());
  conv_b_.resize(cfg_.convolutions.size());
  for (std::size_t i = 0; i < cfg_.convolutions.size(); ++i) {
    const auto& spec = cfg_.convolutions[i];
    const std::size_t window = spec.width * cfg_.char_embed_dim;
    make(conv_w_[i], "embed.conv" + std::to_string(i) + ".w", {spec.filters, window}, window);
    make(conv_b_[i], "embed.conv" + std::to_string(i) + ".b", {spec.filters}, 0);
  }
  const std::size_t f = cfg_.total_filters();
  hw_wt_.resize(cfg_.highway_layers);
  hw_bt_.resize(cfg_.highway_layers);
  hw_wg_.resize(cfg_.highway_layers);
  hw_bg_.resize(cfg_.highway_layers);
  for (std::size_t i = 0; i < cfg_.highway_layers; ++i) {
    const std::string base = "embed.hw" + std::to_string(i) + ".";
    make(hw_wt_[i], base + "wt", {f, f}, f);
    make(hw_bt_[i], base + "bt", {f}, 0);
    make(hw_wg_[i], base + "wg", {f, f}, f);
    make(hw_bg_[i], base + "bg", {f}, 0);
  }
  make(proj_w_, "embed.proj.w", {f, cfg_.output_dim}, f);
  make(proj_b_, "embed.proj.b", {cfg_.output_dim}, 0);
}

std::vector<double> CharCnnEmbedder::embed(const std::string& token, CharCnnCache* cache) const {
  const std::size_t e = cfg_.char_embed_dim;
  const std::size_t len = cfg_.max_token_chars;
  const std::vector<std::size_t> ids = token_char_ids(token, len);

  std::vector<double> pooled(cfg_.total_filters());
  std::vector<std::vector<std::size_t>> argmax(cfg_.convolutions.size());
  std::size_t out_base = 0;
  for (std::size_t ci = 0; ci < cfg_.convolutions.size(); ++ci) {
    const auto& spec = cfg_.convolutions[ci];
    argmax[ci].assign(spec.filters, 0);
    const std::size_t positions = len - spec.width + 1;
    for (std::size_t j = 0; j < spec.filters; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_pos = 0;
      const double* wj = &conv_w_[ci].w.v[j * spec.width * e];
      for (std::size_t pos = 0; pos < positions; ++pos) {
        double acc = conv_b_[ci].w.v[j];
        for (std::size_t t = 0; t < spec.width; ++t) {
          const double* xr = &char_embed_.w.v[ids[pos + t] * e];
          const double* wr = &wj[t * e];
          for (std::size_t c = 0; c < e; ++c) acc += wr[c] * xr[c];
        }
        if (acc > best) {
          best = acc;
          best_pos = pos;
        }
      }
      pooled[out_base + j] = best;
      argmax[ci][j] = best_pos;
    }
    out_base += spec.filters;
  }

  const std::size_t f = cfg_.total_filters();
  std::vector<double> s = pooled;
  std::vector<std::vector<double>> hw_in, hw_t, hw_g;
  for (std::size_t l = 0; l < cfg_.highway_layers; ++l) {
    std::vector<double> t(f), g(f);
    linear_forward(hw_wt_[l].w, s.data(), t.data());
    linear_forward(hw_wg_[l].w, s.data(), g.data());
    for (std::size_t j = 0; j < f; ++j) {
      t[j] = sigmoid(t[j] + hw_bt_[l].w.v[j]);
      g[j] = std::max(0.0, g[j] + hw_bg_[l].w.v[j]);
    }
    std::vector<double> next(f);
    for (std::size_t j = 0; j < f; ++j) next[j] = t[j] * g[j] + (1.0 - t[j]) * s[j];
    hw_in.push_back(std::move(s));
    hw_t.push_back(std::move(t));
    hw_g.push_back(std::move(g));
    s = std::move(next);
  }

  std::vector<double> out(cfg_.output_dim);
  linear_forward(proj_w_.w, s.data(), out.data());
  for (std::size_t j = 0; j < cfg_.output_dim; ++j) out[j] += proj_b_.w.v[j];

  if (cache) {
    cache->char_ids = ids;
    cache->argmax = std::move(argmax);
    cache->pooled = std::move(pooled);
    cache->hw_in = std::move(hw_in);
    cache->hw_t = std::move(hw_t);
    cache->hw_g = std::move(hw_g);
    cache->hw_out = std::move(s);
  }
  return out;
}

void CharCnnEmbedder::backward(const CharCnnCache& cache, const double* dout) {
  const std::size_t e = cfg_.char_embed_dim;
  const std::size_t f = cfg_.total_filters();

  std::vector<double> ds(f, 0.0);
  linear_backward(proj_w_.w, proj_w_.g, proj_b_.g, cache.hw_out.data(), dout, ds.data());

  for (std::size_t l = cfg_.highway_layers; l-- > 0;) {
    const std::vector<double>& s = cache.hw_in[l];
    const std::vector<double>& t = cache.hw_t[l];
    const std::vector<double>& g = cache.hw_g[l];
    std::vector<double> dpre_t(f), dpre_g(f), ds_in(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
      const double d = ds[j];
      dpre_t[j] = d * (g[j] - s[j]) * t[j] * (1.0 - t[j]);
      dpre_g[j] = g[j] > 0.0 ? d * t[j] : 0.0;
      ds_in[j] = d * (1.0 - t[j]);
    }
    linear_backward(hw_wt_[l].w, hw_wt_[l].g, hw_bt_[l].g, s.data(), dpre_t.data(), ds_in.data());
    linear_backward(hw_wg_[l].w, hw_wg_[l].g, hw_bg_[l].g, s.data(), dpre_g.data(), ds_in.data());
    ds = std::move(ds_in);
  }

  std::size_t out_base = 0;
  for (std::size_t ci = 0; ci < cfg_.convolutions.size(); ++ci) {
    const auto& spec = cfg_.convolutions[ci];
    for (std::size_t j = 0; j < spec.filters; ++j) {
      const double d = ds[out_base + j];
      if (d == 0.0) continue;
      const std::size_t pos = cache.argmax[ci][j];
      conv_b_[ci].g.v[j] += d;
      double* dwj = &conv_w_[ci].g.v[j * spec.width * e];
      const double* wj = &conv_w_[ci].w.v[j * spec.width * e];
      for (std::size_t t = 0; t < spec.width; ++t) {
        const std::size_t id = cache.char_ids[pos + t];
        const double* xr = &char_embed_.w.v[id * e];
        double* dxr = &char_embed_.g.v[id * e];
        for (std::size_t c = 0; c < e; ++c) {
          dwj[t * e + c] += d * xr[c];
          dxr[c] += d * wj[t * e + c];
        }
      }
    }
    out_base += spec.filters;
  }
}

std::vector<Param*> CharCnnEmbedder::params() {
  std::vector<Param*> out = {&char_embed_};
  for (auto& p : conv_w_) out.push_back(&p);
  for (auto& p : conv_b_) out.push_back(&p);
  for (std::size_t i = 0; i < hw_wt_.size(); ++i) {
    out.push_back(&hw_wt_[i]);
    out.push_back(&hw_bt_[i]);
    out.push_back(&hw_wg_[i]);
    out.push_back(&hw_bg_[i]);
  }
  out.push_back(&proj_w_);
  out.push_back(&proj_b_);
  return out;
}

}  // namespace hsd::encoder
