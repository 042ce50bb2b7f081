#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsd/corpus.hpp"
#include "hsd/model.hpp"
#include "hsd/optim.hpp"

namespace hsd::train {

enum class ScheduleKind { Constant, Stlr };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  ScheduleKind schedule = ScheduleKind::Constant;
  double stlr_cut_frac = 0.1;
  double stlr_ratio = 32.0;
  double stlr_lr_max = 1e-2;
  double stlr_lr_floor = 1e-8;
  // 0 disables discriminative per-group learning rates.
  double disc_decay = 0.0;
  // 0 disables gradual unfreezing.
  std::size_t unfreeze_epochs_per_stage = 0;
  // <= 0 disables global-norm gradient clipping.
  double clip_norm = 1.0;

  // Language-model pretraining of the token embeddings (subword backbone).
  bool lm_pretrain = false;
  std::size_t lm_epochs = 1;
  std::size_t lm_units = 64;
  std::size_t lm_bptt = 16;
  double lm_lr = 1e-3;
  double lm_dropout = 0.4;
  double lm_dropout_multiplier = 0.5;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_weighted_f1 = 0.0;
};

struct TrainResult {
  ModelBundle model;  // weights from the best-dev-F1 epoch
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 1-based, 0 if training never completed an epoch
  double best_dev_f1 = 0.0;
  double lm_loss = 0.0;  // final LM epoch mean loss when lm_pretrain is on
  bool diverged = false;
};

// Shuffles per epoch with the seeded PRNG, accumulates mean-loss gradients
// per batch, applies schedule/discriminative/unfreezing-filtered AdamW
// updates, and selects the snapshot with the best dev weighted F1. On a
// non-finite loss it stops and returns the last good snapshot.
// External-embeddings bundles take per-record features instead of texts.
TrainResult fit(const ModelBundle& init, const corpus::LabeledCorpus& train_set,
                const corpus::LabeledCorpus& dev_set, const TrainConfig& cfg,
                const std::vector<encoder::EncoderOutput>* train_features = nullptr,
                const std::vector<encoder::EncoderOutput>* dev_features = nullptr);

// Next-token LSTM language model over the task corpus; trains the bundle's
// token embedding table in place and returns the final epoch's mean loss.
// Every dropout rate in this path is scaled by lm_dropout_multiplier and the
// optimizer runs with beta2 = 0.99.
double pretrain_language_model(ModelBundle& bundle, const corpus::LabeledCorpus& corpus,
                               const TrainConfig& cfg, Rng& rng);

// Rows `epoch,train_loss,dev_weighted_f1`; doubles printed with %.17g so a
// rerun of the same seed is byte-identical.
std::string render_history(const std::vector<EpochStats>& history);

double dev_weighted_f1(const ModelBundle& bundle, const corpus::LabeledCorpus& dev_set,
                       const std::vector<encoder::EncoderOutput>* dev_features = nullptr);

}  // namespace hsd::train
