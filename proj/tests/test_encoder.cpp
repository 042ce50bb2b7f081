#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "hsd/encoder.hpp"
#include "hsd/errors.hpp"
#include "hsd/heads.hpp"
#include "hsd/rng.hpp"
#include "hsd/tokenizer.hpp"
#include "hsd/vocab.hpp"
#include "testutil.hpp"

using namespace hsd;
using namespace hsd::encoder;
using hsd::testutil::TempDir;
using hsd::testutil::write_file;

namespace {

Vocabulary tiny_vocab() { return Vocabulary({kPad, kUnk, kCls, kSep, "x", "y"}); }

BackboneConfig tiny_transformer(std::size_t vocab_size) {
  BackboneConfig cfg;
  cfg.kind = BackboneKind::SmallTransformer;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.ff_dim = 16;
  cfg.dropout = 0.1;
  cfg.vocab_size = vocab_size;
  return cfg;
}

TokenSequence seq_of(const std::string& text, const Vocabulary& v, std::size_t max_len) {
  TokenizerOptions opts;
  opts.max_len = max_len;
  return tokenize_subword(text, v, opts);
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("kind and pooling names round trip") {
  for (BackboneKind k : {BackboneKind::SmallTransformer, BackboneKind::CharCnnTransformer,
                         BackboneKind::ExternalEmbeddings})
    CHECK(backbone_kind_from_string(to_string(k)) == k);
  CHECK(to_string(BackboneKind::SmallTransformer) == "small-transformer");
  CHECK(to_string(BackboneKind::CharCnnTransformer) == "char-cnn+small-transformer");
  CHECK(to_string(BackboneKind::ExternalEmbeddings) == "external-embeddings");
  CHECK(pooling_from_string("mean") == Pooling::Mean);
  CHECK(pooling_from_string("cls") == Pooling::Cls);
  CHECK_THROWS_AS(backbone_kind_from_string("bert-large"), ConfigError);
}

TEST_CASE("config validation catches inconsistent dimensions") {
  BackboneConfig cfg = tiny_transformer(6);
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = tiny_transformer(0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = tiny_transformer(6);
  cfg.kind = BackboneKind::CharCnnTransformer;
  cfg.char_cnn.output_dim = 12;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  BackboneConfig ext;
  ext.kind = BackboneKind::ExternalEmbeddings;
  CHECK_NOTHROW(ext.validate());
}

TEST_CASE("sinusoidal position encoding follows the closed form") {
  const std::vector<double> pe = sinusoidal_position(3, 4);
  CHECK(pe[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-12));
  CHECK(pe[1] == doctest::Approx(std::cos(3.0)).epsilon(1e-12));
  CHECK(pe[2] == doctest::Approx(std::sin(3.0 / 100.0)).epsilon(1e-12));
  CHECK(pe[3] == doctest::Approx(std::cos(3.0 / 100.0)).epsilon(1e-12));

  const std::vector<double> zero = sinusoidal_position(0, 6);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 1.0);
  CHECK(zero[4] == 0.0);
  CHECK(zero[5] == 1.0);
}

TEST_CASE("eval forward is deterministic bitwise") {
  Rng rng(5);
  const Vocabulary v = tiny_vocab();
  const Encoder enc(tiny_transformer(v.size()), rng);
  const TokenSequence seq = seq_of("x y x", v, 16);
  const EncoderOutput a = enc.forward(seq, Mode::Eval, nullptr, nullptr);
  const EncoderOutput b = enc.forward(seq, Mode::Eval, nullptr, nullptr);
  CHECK(a.h.v == b.h.v);
  CHECK(a.pooled == b.pooled);
}

TEST_CASE("padded rows stay zero and extra padding never shifts the output") {
  Rng rng(5);
  const Vocabulary v = tiny_vocab();
  const Encoder enc(tiny_transformer(v.size()), rng);

  const TokenSequence short_pad = seq_of("x y", v, 8);
  const TokenSequence long_pad = seq_of("x y", v, 32);
  const EncoderOutput a = enc.forward(short_pad, Mode::Eval, nullptr, nullptr);
  const EncoderOutput b = enc.forward(long_pad, Mode::Eval, nullptr, nullptr);

  CHECK(a.pooled == b.pooled);
  CHECK(a.real_len() == 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(a.h.v[r * 8 + j] == b.h.v[r * 8 + j]);
  for (std::size_t r = 4; r < 32; ++r)
    for (std::size_t j = 0; j < 8; ++j) CHECK(b.h.v[r * 8 + j] == 0.0);
}

TEST_CASE("a CLS SEP only sequence has exactly two nonzero rows") {
  Rng rng(5);
  const Vocabulary v = tiny_vocab();
  const Encoder enc(tiny_transformer(v.size()), rng);
  const EncoderOutput out = enc.forward(seq_of("", v, 8), Mode::Eval, nullptr, nullptr);
  std::size_t nonzero_rows = 0;
  for (std::size_t r = 0; r < 8; ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < 8; ++j) norm += std::abs(out.h.v[r * 8 + j]);
    if (norm > 0.0) ++nonzero_rows;
  }
  CHECK(nonzero_rows == 2);
}

TEST_CASE("mean pooling averages the real rows and cls pooling takes row zero") {
  Rng rng(9);
  const Vocabulary v = tiny_vocab();
  BackboneConfig cfg = tiny_transformer(v.size());
  const Encoder mean_enc(cfg, rng);
  const TokenSequence seq = seq_of("x y y", v, 8);
  const EncoderOutput out = mean_enc.forward(seq, Mode::Eval, nullptr, nullptr);
  for (std::size_t j = 0; j < cfg.dim; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < out.real_len(); ++r) acc += out.h.v[r * cfg.dim + j];
    CHECK(out.pooled[j] == doctest::Approx(acc / 5.0).epsilon(1e-12));
  }

  Rng rng2(9);
  cfg.pooling = Pooling::Cls;
  const Encoder cls_enc(cfg, rng2);
  const EncoderOutput cls_out = cls_enc.forward(seq, Mode::Eval, nullptr, nullptr);
  for (std::size_t j = 0; j < cfg.dim; ++j)
    CHECK(cls_out.pooled[j] == cls_out.h.v[j]);
}

TEST_CASE("train mode requires an rng and external kind rejects token input") {
  Rng rng(5);
  const Vocabulary v = tiny_vocab();
  const Encoder enc(tiny_transformer(v.size()), rng);
  const TokenSequence seq = seq_of("x", v, 8);
  CHECK_THROWS_AS(enc.forward(seq, Mode::Train, nullptr, nullptr), ConfigError);

  BackboneConfig ext;
  ext.kind = BackboneKind::ExternalEmbeddings;
  Rng rng2(5);
  const Encoder ext_enc(ext, rng2);
  CHECK_THROWS_AS(ext_enc.forward(seq, Mode::Eval, nullptr, nullptr), ConfigError);
}

TEST_CASE("character backbone encodes token strings without a vocabulary") {
  Rng rng(13);
  BackboneConfig cfg;
  cfg.kind = BackboneKind::CharCnnTransformer;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.ff_dim = 16;
  cfg.char_cnn.char_embed_dim = 4;
  cfg.char_cnn.convolutions = {{1, 4}, {2, 4}};
  cfg.char_cnn.output_dim = 8;
  cfg.char_cnn.max_token_chars = 8;
  const Encoder enc(cfg, rng);

  TokenizerOptions opts;
  opts.max_len = 8;
  const TokenSequence seq = tokenize_words("stay strong", opts);
  const EncoderOutput out = enc.forward(seq, Mode::Eval, nullptr, nullptr);
  CHECK(out.real_len() == 4);
  CHECK(out.pooled.size() == 8);

  // Identical token strings embed identically before context mixing.
  const EncoderOutput again = enc.forward(seq, Mode::Eval, nullptr, nullptr);
  CHECK(out.h.v == again.h.v);
}

TEST_CASE("external embeddings pass through row-for-row") {
  TempDir tmp;
  write_file(tmp.file("e.vec"),
             "3 4\n"
             "1 2 3 4\n"
             "5 6 7 8\n"
             "-1 -2 -3 -4\n");
  const Tensor rows = load_external_embeddings(tmp.file("e.vec"));
  REQUIRE(rows.shape == std::vector<std::size_t>{3, 4});
  CHECK(rows.v[0] == 1.0);
  CHECK(rows.v[11] == -4.0);

  const EncoderOutput out = encode_external(rows, 6, Pooling::Mean);
  CHECK(out.real_len() == 3);
  for (std::size_t i = 0; i < 12; ++i) CHECK(out.h.v[i] == rows.v[i]);
  for (std::size_t i = 12; i < 24; ++i) CHECK(out.h.v[i] == 0.0);
  CHECK(out.pooled == std::vector<double>{(1 + 5 - 1) / 3.0, (2 + 6 - 2) / 3.0, (3 + 7 - 3) / 3.0,
                                          (4 + 8 - 4) / 3.0});

  const EncoderOutput cls = encode_external(rows, 6, Pooling::Cls);
  CHECK(cls.pooled == std::vector<double>{1, 2, 3, 4});

  CHECK_THROWS_AS(encode_external(rows, 2, Pooling::Mean), ConfigError);
}

TEST_CASE("external embedding files validate their header") {
  TempDir tmp;
  write_file(tmp.file("bad.vec"), "oops\n");
  CHECK_THROWS_AS(load_external_embeddings(tmp.file("bad.vec")), IoError);
  write_file(tmp.file("short.vec"), "2 3\n1 2 3\n");
  CHECK_THROWS_AS(load_external_embeddings(tmp.file("short.vec")), IoError);
  CHECK_THROWS_AS(load_external_embeddings(tmp.file("absent.vec")), IoError);
}

TEST_CASE("layer groups run from the top layer down to the embedding") {
  Rng rng(5);
  const Vocabulary v = tiny_vocab();
  Encoder enc(tiny_transformer(v.size()), rng);
  CHECK(enc.layer_groups() == std::vector<std::string>{"enc.1", "enc.0", "embed"});

  bool saw_embed = false, saw_enc0 = false;
  for (Param* p : enc.params()) {
    if (p->group == "embed") saw_embed = true;
    if (p->group == "enc.0") saw_enc0 = true;
  }
  CHECK(saw_embed);
  CHECK(saw_enc0);
}

TEST_CASE("backward matches finite differences through both layers") {
  Rng rng(31);
  const Vocabulary v = tiny_vocab();
  BackboneConfig cfg = tiny_transformer(v.size());
  cfg.layers = 1;
  cfg.dropout = 0.0;
  Encoder enc(cfg, rng);
  const TokenSequence seq = seq_of("x y", v, 6);

  std::vector<double> probe(cfg.dim);
  for (double& x : probe) x = rng.uniform(-1.0, 1.0);

  auto loss = [&] {
    const EncoderOutput out = enc.forward(seq, Mode::Eval, nullptr, nullptr);
    double acc = 0.0;
    for (std::size_t j = 0; j < probe.size(); ++j) acc += probe[j] * out.pooled[j];
    return acc;
  };

  auto params = enc.params();
  for (Param* p : params) p->zero_grad();
  EncoderCache cache;
  enc.forward(seq, Mode::Eval, nullptr, &cache);
  enc.backward(cache, nullptr, &probe);

  const double err = heads::gradient_check(loss, params, 1e-6, 150, rng);
  CHECK(err < 1e-6);
}

TEST_CASE("backward accepts a sequence-level gradient too") {
  Rng rng(37);
  const Vocabulary v = tiny_vocab();
  BackboneConfig cfg = tiny_transformer(v.size());
  cfg.layers = 1;
  cfg.dropout = 0.0;
  Encoder enc(cfg, rng);
  const TokenSequence seq = seq_of("y x y", v, 6);

  EncoderCache cache;
  const EncoderOutput out = enc.forward(seq, Mode::Eval, nullptr, &cache);
  Tensor dh({out.real_len(), cfg.dim});
  Rng probe_rng(99);
  for (double& x : dh.v) x = probe_rng.uniform(-1.0, 1.0);

  auto loss = [&] {
    const EncoderOutput o = enc.forward(seq, Mode::Eval, nullptr, nullptr);
    double acc = 0.0;
    for (std::size_t r = 0; r < o.real_len(); ++r)
      for (std::size_t j = 0; j < cfg.dim; ++j) acc += dh.v[r * cfg.dim + j] * o.h.v[r * cfg.dim + j];
    return acc;
  };

  auto params = enc.params();
  for (Param* p : params) p->zero_grad();
  enc.backward(cache, &dh, nullptr);

  const double err = heads::gradient_check(loss, params, 1e-6, 150, rng);
  CHECK(err < 1e-6);
}

}  // TEST_SUITE
