#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "hsd/charcnn.hpp"
#include "hsd/errors.hpp"
#include "hsd/heads.hpp"
#include "hsd/rng.hpp"

using namespace hsd;
using namespace hsd::encoder;

namespace {

Param* find_param(std::vector<Param*> params, const std::string& name) {
  for (Param* p : params)
    if (p->name == name) return p;
  REQUIRE(false);
  return nullptr;
}

}  // namespace

TEST_SUITE("charcnn") {

TEST_CASE("config validation") {
  CharCnnConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.total_filters() == 48);

  cfg.char_embed_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = CharCnnConfig{};
  cfg.convolutions = {{30, 4}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = CharCnnConfig{};
  cfg.convolutions.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = CharCnnConfig{};
  cfg.max_token_chars = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("embedding is a pure function of the token") {
  Rng rng(7);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 4;
  cfg.convolutions = {{1, 3}, {2, 3}};
  cfg.output_dim = 5;
  cfg.max_token_chars = 8;
  const CharCnnEmbedder embedder(cfg, rng);
  CHECK(embedder.embed("hope", nullptr) == embedder.embed("hope", nullptr));
  CHECK(embedder.embed("", nullptr) == embedder.embed("", nullptr));
}

TEST_CASE("all-zero parameters produce the zero vector") {
  Rng rng(7);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 3;
  cfg.convolutions = {{1, 2}, {3, 2}};
  cfg.output_dim = 4;
  cfg.max_token_chars = 8;
  CharCnnEmbedder embedder(cfg, rng);
  for (Param* p : embedder.params()) p->w.fill(0.0);
  for (double x : embedder.embed("hope", nullptr)) CHECK(x == 0.0);
}

TEST_CASE("hand-set width-2 convolution on the token ab") {
  Rng rng(7);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 1;
  cfg.convolutions = {{2, 1}};
  cfg.highway_layers = 0;
  cfg.output_dim = 1;
  cfg.max_token_chars = 4;
  CharCnnEmbedder embedder(cfg, rng);

  auto params = embedder.params();
  Param* chars = find_param(params, "embed.char");
  chars->w.fill(0.0);
  chars->w.v[kCharBow] = 0.1;
  chars->w.v['a'] = 2.0;
  chars->w.v['b'] = 3.0;
  chars->w.v[kCharEow] = -0.5;
  find_param(params, "embed.conv0.w")->w.v = {1.0, 0.5};
  find_param(params, "embed.conv0.b")->w.v = {0.25};
  find_param(params, "embed.proj.w")->w.v = {2.0};
  find_param(params, "embed.proj.b")->w.v = {0.5};

  // Windows: (BOW,a)=1.35, (a,b)=3.75, (b,EOW)=3.0; max-pool takes 3.75.
  CharCnnCache cache;
  const std::vector<double> out = embedder.embed("ab", &cache);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == doctest::Approx(2.0 * 3.75 + 0.5).epsilon(1e-12));
  REQUIRE(cache.pooled.size() == 1);
  CHECK(cache.pooled[0] == doctest::Approx(3.75).epsilon(1e-12));
  CHECK(cache.argmax[0][0] == 1);
}

TEST_CASE("character order changes the embedding") {
  Rng rng(11);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 4;
  cfg.convolutions = {{2, 4}};
  cfg.output_dim = 4;
  cfg.max_token_chars = 6;
  const CharCnnEmbedder embedder(cfg, rng);
  const auto ab = embedder.embed("ab", nullptr);
  const auto ba = embedder.embed("ba", nullptr);
  double diff = 0.0;
  for (std::size_t i = 0; i < ab.size(); ++i) diff += std::abs(ab[i] - ba[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("long tokens truncate to max_token_chars") {
  Rng rng(3);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 2;
  cfg.convolutions = {{1, 2}};
  cfg.output_dim = 2;
  cfg.max_token_chars = 5;
  const CharCnnEmbedder embedder(cfg, rng);
  CharCnnCache cache;
  embedder.embed("abcdefgh", &cache);
  CHECK(cache.char_ids.size() == 5);
  CHECK(cache.char_ids.back() == kCharEow);
}

TEST_CASE("backward matches finite differences") {
  Rng rng(23);
  CharCnnConfig cfg;
  cfg.char_embed_dim = 2;
  cfg.convolutions = {{1, 2}, {2, 2}};
  cfg.highway_layers = 1;
  cfg.output_dim = 3;
  cfg.max_token_chars = 6;
  CharCnnEmbedder embedder(cfg, rng);

  std::vector<double> probe(cfg.output_dim);
  for (double& x : probe) x = rng.uniform(-1.0, 1.0);

  auto loss = [&] {
    const auto out = embedder.embed("hope", nullptr);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += probe[i] * out[i];
    return acc;
  };

  auto params = embedder.params();
  for (Param* p : params) p->zero_grad();
  CharCnnCache cache;
  embedder.embed("hope", &cache);
  embedder.backward(cache, probe.data());

  const double err = heads::gradient_check(loss, params, 1e-6, 100, rng);
  CHECK(err < 1e-6);
}

}  // TEST_SUITE
