#pragma once

#include <optional>
#include <string>

#include "hsd/corpus.hpp"
#include "hsd/train.hpp"

namespace hsd::cli {

// Complete description of one run: data, model, optimization, output. Keys
// live in the sections of the config file; every key can also be set with
// `--set key=value` (flags beat the file, the file beats the defaults).
struct RunConfig {
  // [data]
  corpus::Language language = corpus::Language::English;
  std::string train_path, dev_path, test_path;
  std::optional<std::string> label_hope, label_nothope, label_other;
  bool header = false;
  std::string embeddings_train, embeddings_dev, embeddings_test;

  // [model]
  train::ModelConfig model;
  std::size_t vocab_size = 2048;
  std::size_t min_pair_frequency = 2;

  // [train]
  train::TrainConfig train;

  // [output]
  std::string out_dir = "run-out";

  corpus::LabelSchema schema() const;
};

// Sectioned `key = value` text; `#` and `;` start comments. Unknown sections
// or keys are errors.
RunConfig parse_config_file(const std::string& path);
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

// Bare-key override (section inferred; all keys are unique). Unknown keys
// are errors naming the key.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical flat listing ("section.key=value" per line) used by manifests.
std::string render_config(const RunConfig& cfg);

}  // namespace hsd::cli
