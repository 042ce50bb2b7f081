#include "hsd/model.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd::train {

std::string to_string(HeadKind kind) { return kind == HeadKind::Dense ? "dense" : "bilstm"; }

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "dense") return HeadKind::Dense;
  if (s == "bilstm") return HeadKind::BiLstm;
  throw ConfigError("unknown head kind: " + s + " (expected dense or bilstm)");
}

void ModelConfig::validate() const {
  backbone.validate();
  if (head == HeadKind::BiLstm && lstm_units == 0)
    throw ConfigError("bilstm head needs a positive unit count");
  if (head_dropout < 0.0 || head_dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (tokenizer.max_len < 2) throw ConfigError("max_len must be at least 2");
}

ModelBundle ModelBundle::create(const ModelConfig& cfg, corpus::Language language,
                                const corpus::LabelSchema& schema,
                                const std::optional<encoder::Vocabulary>& vocab,
                                std::uint64_t seed) {
  ModelBundle b;
  b.cfg_ = cfg;
  b.language_ = language;
  b.schema_ = schema;
  b.schema_.validate();
  if (cfg.backbone.kind == encoder::BackboneKind::SmallTransformer) {
    if (!vocab) throw ConfigError("subword backbone requires a vocabulary");
    b.vocab_ = vocab;
    b.cfg_.backbone.vocab_size = vocab->size();
  }
  b.cfg_.validate();

  Rng rng(seed);
  if (b.cfg_.backbone.kind != encoder::BackboneKind::ExternalEmbeddings)
    b.encoder_.emplace(b.cfg_.backbone, rng);
  if (b.cfg_.head == HeadKind::Dense) {
    heads::DenseHeadConfig hc;
    hc.input_dim = b.cfg_.backbone.dim;
    hc.hidden_dim = b.cfg_.dense_hidden ? b.cfg_.dense_hidden : b.cfg_.backbone.dim;
    hc.classes = corpus::kNumClasses;
    hc.dropout = b.cfg_.head_dropout;
    b.dense_.emplace(hc, rng);
  } else {
    heads::BiLstmHeadConfig hc;
    hc.input_dim = b.cfg_.backbone.dim;
    hc.units = b.cfg_.lstm_units;
    hc.classes = corpus::kNumClasses;
    hc.dropout = b.cfg_.head_dropout;
    b.bilstm_.emplace(hc, rng);
  }
  return b;
}

encoder::TokenSequence ModelBundle::encode_text(const std::string& text) const {
  switch (cfg_.backbone.kind) {
    case encoder::BackboneKind::SmallTransformer:
      return encoder::tokenize_subword(text, *vocab_, cfg_.tokenizer);
    case encoder::BackboneKind::CharCnnTransformer:
      return encoder::tokenize_words(text, cfg_.tokenizer);
    case encoder::BackboneKind::ExternalEmbeddings:
      throw ConfigError("external-embeddings model consumes vector files, not raw text");
  }
  throw ConfigError("unreachable backbone kind");
}

std::vector<double> ModelBundle::head_forward(const encoder::EncoderOutput& out, Mode mode,
                                              Rng* rng, ForwardCache* cache) const {
  if (cfg_.head == HeadKind::Dense)
    return dense_->forward(out.pooled, mode, rng, cache ? &cache->dense : nullptr);
  const std::size_t n = out.real_len();
  return bilstm_->forward(out.h, n, mode, rng, cache ? &cache->lstm : nullptr);
}

std::vector<double> ModelBundle::logits(const encoder::TokenSequence& seq, Mode mode, Rng* rng,
                                        ForwardCache* cache) const {
  if (!encoder_) throw ConfigError("external-embeddings model consumes vector files, not tokens");
  encoder::EncoderOutput out = encoder_->forward(seq, mode, rng, cache ? &cache->enc : nullptr);
  std::vector<double> l = head_forward(out, mode, rng, cache);
  if (cache) cache->out = std::move(out);
  return l;
}

std::vector<double> ModelBundle::logits_features(const encoder::EncoderOutput& features, Mode mode,
                                                 Rng* rng, ForwardCache* cache) const {
  if (features.h.shape[1] != cfg_.backbone.dim)
    throw ConfigError("external embedding dim does not match the model");
  std::vector<double> l = head_forward(features, mode, rng, cache);
  if (cache) cache->out = features;
  return l;
}

void ModelBundle::backward(const ForwardCache& cache, const std::vector<double>& dlogits) {
  const std::size_t d = cfg_.backbone.dim;
  if (cfg_.head == HeadKind::Dense) {
    std::vector<double> dpooled(d, 0.0);
    dense_->backward(cache.dense, dlogits, &dpooled);
    if (encoder_) encoder_->backward(cache.enc, nullptr, &dpooled);
  } else {
    const std::size_t n = cache.lstm.n;
    Tensor dh({n, d});
    bilstm_->backward(cache.lstm, dlogits, &dh);
    if (encoder_) encoder_->backward(cache.enc, &dh, nullptr);
  }
}

std::vector<Param*> ModelBundle::params() {
  std::vector<Param*> out;
  if (encoder_)
    for (Param* p : encoder_->params()) out.push_back(p);
  if (dense_)
    for (Param* p : dense_->params()) out.push_back(p);
  if (bilstm_)
    for (Param* p : bilstm_->params()) out.push_back(p);
  return out;
}

std::vector<std::string> ModelBundle::group_order() const {
  std::vector<std::string> out = {"head"};
  if (encoder_)
    for (const std::string& g : encoder_->layer_groups()) out.push_back(g);
  return out;
}

Prediction ModelBundle::predict_one(const std::string& text) const {
  const encoder::TokenSequence seq = encode_text(text);
  const std::vector<double> l = logits(seq, Mode::Eval, nullptr, nullptr);
  Prediction p;
  p.probs = heads::softmax(l);
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.probs.size(); ++c)
    if (p.probs[c] > p.probs[best]) best = c;
  p.label = static_cast<corpus::Label>(best);
  return p;
}

Prediction ModelBundle::predict_features_one(const encoder::EncoderOutput& features) const {
  const std::vector<double> l = logits_features(features, Mode::Eval, nullptr, nullptr);
  Prediction p;
  p.probs = heads::softmax(l);
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.probs.size(); ++c)
    if (p.probs[c] > p.probs[best]) best = c;
  p.label = static_cast<corpus::Label>(best);
  return p;
}

std::vector<Prediction> predict(const ModelBundle& bundle, const std::vector<std::string>& texts) {
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(bundle.predict_one(t));
  return out;
}

std::vector<Prediction> predict_features(const ModelBundle& bundle,
                                         const std::vector<encoder::EncoderOutput>& features) {
  std::vector<Prediction> out;
  out.reserve(features.size());
  for (const encoder::EncoderOutput& f : features) out.push_back(bundle.predict_features_one(f));
  return out;
}

std::vector<encoder::EncoderOutput> load_external_features(const std::string& dir,
                                                           std::size_t count, std::size_t max_len,
                                                           encoder::Pooling pooling) {
  std::vector<encoder::EncoderOutput> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string path =
        (std::filesystem::path(dir) / (std::to_string(i) + ".vec")).string();
    out.push_back(encoder::encode_external(encoder::load_external_embeddings(path), max_len,
                                           pooling));
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'H', 'S', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  write_u64(out, bits);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint truncated");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

std::string read_str(std::istream& in) {
  const std::uint64_t len = read_u64(in);
  if (len > (1ull << 32)) throw IoError("checkpoint string length implausible");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint truncated");
  return s;
}

std::string convs_to_string(const std::vector<encoder::ConvSpec>& convs) {
  std::string out;
  for (const auto& c : convs) {
    if (!out.empty()) out += ',';
    out += std::to_string(c.width) + ':' + std::to_string(c.filters);
  }
  return out;
}

std::vector<encoder::ConvSpec> convs_from_string(const std::string& s) {
  std::vector<encoder::ConvSpec> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("bad convolution spec: " + item);
    out.push_back({static_cast<std::size_t>(std::stoull(item.substr(0, colon))),
                   static_cast<std::size_t>(std::stoull(item.substr(colon + 1)))});
  }
  return out;
}

std::string config_block(const ModelConfig& cfg, corpus::Language language,
                         const std::map<std::string, std::string>& meta) {
  std::ostringstream out;
  out << "language=" << corpus::language_name(language) << '\n';
  out << "kind=" << encoder::to_string(cfg.backbone.kind) << '\n';
  out << "layers=" << cfg.backbone.layers << '\n';
  out << "heads=" << cfg.backbone.heads << '\n';
  out << "dim=" << cfg.backbone.dim << '\n';
  out << "ff_dim=" << cfg.backbone.ff_dim << '\n';
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.backbone.dropout);
  out << "dropout=" << buf << '\n';
  out << "pooling=" << encoder::to_string(cfg.backbone.pooling) << '\n';
  out << "vocab_size=" << cfg.backbone.vocab_size << '\n';
  out << "cc_embed_dim=" << cfg.backbone.char_cnn.char_embed_dim << '\n';
  out << "cc_convs=" << convs_to_string(cfg.backbone.char_cnn.convolutions) << '\n';
  out << "cc_highway=" << cfg.backbone.char_cnn.highway_layers << '\n';
  out << "cc_max_chars=" << cfg.backbone.char_cnn.max_token_chars << '\n';
  out << "head=" << to_string(cfg.head) << '\n';
  out << "dense_hidden=" << cfg.dense_hidden << '\n';
  out << "lstm_units=" << cfg.lstm_units << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.head_dropout);
  out << "head_dropout=" << buf << '\n';
  out << "max_len=" << cfg.tokenizer.max_len << '\n';
  out << "lowercase=" << (cfg.tokenizer.lowercase ? 1 : 0) << '\n';
  out << "max_chars_per_word=" << cfg.tokenizer.max_chars_per_word << '\n';
  for (const auto& [k, v] : meta) out << "meta." << k << '=' << v << '\n';
  return out.str();
}

}  // namespace

void ModelBundle::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    for (const std::string& s : schema_.surface) write_str(out, s);
    write_str(out, config_block(cfg_, language_, meta_));
    if (vocab_) {
      write_u64(out, vocab_->size());
      for (std::size_t i = 0; i < vocab_->size(); ++i) write_str(out, vocab_->token(static_cast<int>(i)));
    } else {
      write_u64(out, 0);
    }
    ModelBundle& self = const_cast<ModelBundle&>(*this);
    std::vector<Param*> ps = self.params();
    write_u64(out, ps.size());
    for (const Param* p : ps) {
      write_str(out, p->name);
      write_u32(out, static_cast<std::uint32_t>(p->w.shape.size()));
      for (std::size_t d : p->w.shape) write_u64(out, d);
      for (double x : p->w.v) write_f64(out, x);
    }
    if (!out) throw IoError("failed writing checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path + ": " + ec.message());
}

ModelBundle ModelBundle::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw SchemaMismatchError("not a model checkpoint: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw SchemaMismatchError("unsupported checkpoint version " + std::to_string(version));

  corpus::LabelSchema schema;
  for (std::string& s : schema.surface) s = read_str(in);

  ModelConfig cfg;
  corpus::Language language = corpus::Language::English;
  std::map<std::string, std::string> meta;
  {
    std::istringstream block(read_str(in));
    std::string line;
    while (std::getline(block, line)) {
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) throw SchemaMismatchError("bad checkpoint config line: " + line);
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "language") language = corpus::parse_language(value);
      else if (key == "kind") cfg.backbone.kind = encoder::backbone_kind_from_string(value);
      else if (key == "layers") cfg.backbone.layers = std::stoull(value);
      else if (key == "heads") cfg.backbone.heads = std::stoull(value);
      else if (key == "dim") cfg.backbone.dim = std::stoull(value);
      else if (key == "ff_dim") cfg.backbone.ff_dim = std::stoull(value);
      else if (key == "dropout") cfg.backbone.dropout = std::stod(value);
      else if (key == "pooling") cfg.backbone.pooling = encoder::pooling_from_string(value);
      else if (key == "vocab_size") cfg.backbone.vocab_size = std::stoull(value);
      else if (key == "cc_embed_dim") cfg.backbone.char_cnn.char_embed_dim = std::stoull(value);
      else if (key == "cc_convs") cfg.backbone.char_cnn.convolutions = convs_from_string(value);
      else if (key == "cc_highway") cfg.backbone.char_cnn.highway_layers = std::stoull(value);
      else if (key == "cc_max_chars") cfg.backbone.char_cnn.max_token_chars = std::stoull(value);
      else if (key == "head") cfg.head = head_kind_from_string(value);
      else if (key == "dense_hidden") cfg.dense_hidden = std::stoull(value);
      else if (key == "lstm_units") cfg.lstm_units = std::stoull(value);
      else if (key == "head_dropout") cfg.head_dropout = std::stod(value);
      else if (key == "max_len") cfg.tokenizer.max_len = std::stoull(value);
      else if (key == "lowercase") cfg.tokenizer.lowercase = value == "1";
      else if (key == "max_chars_per_word") cfg.tokenizer.max_chars_per_word = std::stoull(value);
      else if (key.rfind("meta.", 0) == 0) meta[key.substr(5)] = value;
      else throw SchemaMismatchError("unknown checkpoint config key: " + key);
    }
  }
  cfg.backbone.char_cnn.output_dim = cfg.backbone.dim;
  schema.language = language;

  const std::uint64_t vocab_count = read_u64(in);
  std::optional<encoder::Vocabulary> vocab;
  if (vocab_count > 0) {
    std::vector<std::string> tokens(vocab_count);
    for (std::string& t : tokens) t = read_str(in);
    vocab.emplace(std::move(tokens));
  }

  ModelBundle bundle = create(cfg, language, schema, vocab, 0);
  bundle.meta_ = std::move(meta);

  std::map<std::string, Param*> by_name;
  for (Param* p : bundle.params()) by_name[p->name] = p;
  const std::uint64_t tensor_count = read_u64(in);
  if (tensor_count != by_name.size())
    throw SchemaMismatchError("checkpoint tensor count does not match the configuration");
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    const std::string name = read_str(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw SchemaMismatchError("unexpected checkpoint tensor: " + name);
    Param* p = it->second;
    const std::uint32_t ndim = read_u32(in);
    std::vector<std::size_t> shape(ndim);
    for (std::uint32_t d0 = 0; d0 < ndim; ++d0) shape[d0] = read_u64(in);
    if (shape != p->w.shape) throw SchemaMismatchError("shape mismatch for tensor " + name);
    for (double& x : p->w.v) x = read_f64(in);
  }
  return bundle;
}

}  // namespace hsd::train
