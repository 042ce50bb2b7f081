#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsd/corpus.hpp"
#include "hsd/encoder.hpp"
#include "hsd/heads.hpp"
#include "hsd/tokenizer.hpp"
#include "hsd/vocab.hpp"

namespace hsd::train {

enum class HeadKind { Dense, BiLstm };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

struct ModelConfig {
  encoder::BackboneConfig backbone;
  HeadKind head = HeadKind::Dense;
  std::size_t dense_hidden = 0;  // 0 means same as backbone dim
  std::size_t lstm_units = 256;
  double head_dropout = 0.4;
  encoder::TokenizerOptions tokenizer;

  void validate() const;
};

struct Prediction {
  corpus::Label label = corpus::Label::Hope;
  std::vector<double> probs;
};

struct ForwardCache {
  encoder::EncoderCache enc;
  encoder::EncoderOutput out;
  heads::DenseHeadCache dense;
  heads::BiLstmHeadCache lstm;
};

// Everything one trained classifier needs: backbone, head, tokenizer state,
// label schema, run metadata. Copyable so the loop can snapshot epochs;
// round-trips through its checkpoint file bit-exactly.
class ModelBundle {
 public:
  ModelBundle() = default;

  static ModelBundle create(const ModelConfig& cfg, corpus::Language language,
                            const corpus::LabelSchema& schema,
                            const std::optional<encoder::Vocabulary>& vocab, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  corpus::Language language() const { return language_; }
  const corpus::LabelSchema& schema() const { return schema_; }
  const std::optional<encoder::Vocabulary>& vocab() const { return vocab_; }
  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  encoder::TokenSequence encode_text(const std::string& text) const;

  // Transformer kinds only; external features go through logits_features.
  std::vector<double> logits(const encoder::TokenSequence& seq, Mode mode, Rng* rng,
                             ForwardCache* cache) const;
  std::vector<double> logits_features(const encoder::EncoderOutput& features, Mode mode, Rng* rng,
                                      ForwardCache* cache) const;
  // Head backward plus encoder backward where one exists.
  void backward(const ForwardCache& cache, const std::vector<double>& dlogits);

  std::vector<Param*> params();
  // Unfreezing granularity, classifier first: head, enc.<L-1>, ..., embed.
  std::vector<std::string> group_order() const;

  Prediction predict_one(const std::string& text) const;
  Prediction predict_features_one(const encoder::EncoderOutput& features) const;

  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);

 private:
  std::vector<double> head_forward(const encoder::EncoderOutput& out, Mode mode, Rng* rng,
                                   ForwardCache* cache) const;

  ModelConfig cfg_;
  corpus::Language language_ = corpus::Language::English;
  corpus::LabelSchema schema_;
  std::optional<encoder::Vocabulary> vocab_;
  std::optional<encoder::Encoder> encoder_;
  std::optional<heads::DenseHead> dense_;
  std::optional<heads::BiLstmHead> bilstm_;
  std::map<std::string, std::string> meta_;
};

std::vector<Prediction> predict(const ModelBundle& bundle, const std::vector<std::string>& texts);
std::vector<Prediction> predict_features(const ModelBundle& bundle,
                                         const std::vector<encoder::EncoderOutput>& features);

// Directory of <index>.vec files in the external-embeddings format, one per
// corpus record.
std::vector<encoder::EncoderOutput> load_external_features(const std::string& dir,
                                                           std::size_t count, std::size_t max_len,
                                                           encoder::Pooling pooling);

}  // namespace hsd::train
