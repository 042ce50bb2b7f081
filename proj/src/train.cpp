#include "hsd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "hsd/errors.hpp"
#include "hsd/heads.hpp"
#include "hsd/metrics.hpp"
#include "hsd/nn.hpp"

namespace hsd::train {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Constant ? "constant" : "stlr";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "stlr") return ScheduleKind::Stlr;
  throw ConfigError("unknown schedule: " + s + " (expected constant or stlr)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  optimizer.validate();
  if (disc_decay != 0.0 && disc_decay <= 1.0)
    throw ConfigError("discriminative decay factor must exceed 1");
  if (schedule == ScheduleKind::Stlr) {
    StlrConfig probe{1, stlr_cut_frac, stlr_ratio, stlr_lr_max, stlr_lr_floor};
    probe.validate();
  }
  if (lm_pretrain) {
    if (lm_epochs == 0 || lm_units == 0 || lm_bptt < 2)
      throw ConfigError("language-model pretraining needs epochs, units and bptt >= 2");
    if (lm_lr <= 0.0) throw ConfigError("language-model learning rate must be positive");
    if (lm_dropout < 0.0 || lm_dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  }
}

std::string render_history(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,dev_weighted_f1\n";
  char buf[64];
  for (const EpochStats& e : history) {
    out << e.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", e.train_loss);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", e.dev_weighted_f1);
    out << buf << '\n';
  }
  return out.str();
}

namespace {

void check_schema_match(const ModelBundle& bundle, const corpus::LabeledCorpus& data,
                        const char* which) {
  if (data.language != bundle.language() || data.schema.surface != bundle.schema().surface)
    throw ConfigError(std::string("the ") + which + " corpus does not share the model's schema");
}

std::vector<encoder::TokenSequence> featurize(const ModelBundle& bundle,
                                              const corpus::LabeledCorpus& data) {
  std::vector<encoder::TokenSequence> out;
  out.reserve(data.size());
  for (const corpus::LabeledRecord& r : data.records) out.push_back(bundle.encode_text(r.text));
  return out;
}

}  // namespace

double dev_weighted_f1(const ModelBundle& bundle, const corpus::LabeledCorpus& dev_set,
                       const std::vector<encoder::EncoderOutput>* dev_features) {
  std::vector<corpus::Label> gold, pred;
  gold.reserve(dev_set.size());
  pred.reserve(dev_set.size());
  for (std::size_t i = 0; i < dev_set.size(); ++i) {
    gold.push_back(dev_set.records[i].label);
    const Prediction p = dev_features ? bundle.predict_features_one((*dev_features)[i])
                                      : bundle.predict_one(dev_set.records[i].text);
    pred.push_back(p.label);
  }
  return metrics::aggregate_report(metrics::confusion(gold, pred)).weighted.f1;
}

TrainResult fit(const ModelBundle& init, const corpus::LabeledCorpus& train_set,
                const corpus::LabeledCorpus& dev_set, const TrainConfig& cfg,
                const std::vector<encoder::EncoderOutput>* train_features,
                const std::vector<encoder::EncoderOutput>* dev_features) {
  cfg.validate();
  check_schema_match(init, train_set, "train");
  check_schema_match(init, dev_set, "dev");
  if (train_set.empty()) throw InsufficientDataError("training corpus is empty");
  if (dev_set.empty()) throw InsufficientDataError("dev corpus is empty");

  const bool external =
      init.config().backbone.kind == encoder::BackboneKind::ExternalEmbeddings;
  if (external) {
    if (!train_features || !dev_features)
      throw ConfigError("external-embeddings training needs feature files for train and dev");
    if (train_features->size() != train_set.size() || dev_features->size() != dev_set.size())
      throw ConfigError("feature count does not match the corpus");
  }

  ModelBundle bundle = init;
  TrainResult result;
  Rng rng(cfg.seed);

  if (cfg.lm_pretrain) {
    if (init.config().backbone.kind != encoder::BackboneKind::SmallTransformer)
      throw ConfigError("language-model pretraining needs the subword backbone");
    result.lm_loss = pretrain_language_model(bundle, train_set, cfg, rng);
  }

  std::vector<encoder::TokenSequence> train_seqs, dev_seqs;
  if (!external) {
    train_seqs = featurize(bundle, train_set);
    dev_seqs = featurize(bundle, dev_set);
  }

  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  StlrConfig stlr_cfg{cfg.epochs * steps_per_epoch, cfg.stlr_cut_frac, cfg.stlr_ratio,
                      cfg.stlr_lr_max, cfg.stlr_lr_floor};

  const std::vector<std::string> groups = bundle.group_order();
  std::map<std::string, std::size_t> group_index;
  for (std::size_t i = 0; i < groups.size(); ++i) group_index[groups[i]] = i;
  UnfreezePlan plan{groups, cfg.unfreeze_epochs_per_stage};

  AdamW optimizer(cfg.optimizer);
  std::uint64_t global_step = 0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    bool bad = false;

    for (std::size_t start = 0; start < n && !bad; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);

      std::vector<Param*> params = bundle.params();
      for (Param* p : params) p->zero_grad();

      for (std::size_t bi = start; bi < end; ++bi) {
        const std::size_t idx = order[bi];
        ForwardCache cache;
        std::vector<double> logits =
            external
                ? bundle.logits_features((*train_features)[idx], Mode::Train, &rng, &cache)
                : bundle.logits(train_seqs[idx], Mode::Train, &rng, &cache);
        auto [loss, probs] = heads::softmax_cross_entropy(
            logits, static_cast<std::size_t>(train_set.records[idx].label));
        if (!std::isfinite(loss)) {
          bad = true;
          break;
        }
        loss_sum += loss;
        std::vector<double> dlogits =
            heads::cross_entropy_grad(probs, static_cast<std::size_t>(train_set.records[idx].label));
        for (double& d : dlogits) d *= inv_batch;
        bundle.backward(cache, dlogits);
      }
      if (bad) break;

      const std::size_t stage_groups =
          cfg.unfreeze_epochs_per_stage > 0 ? plan.trainable_groups(epoch) : groups.size();
      auto trainable = [&](const Param& p) {
        auto it = group_index.find(p.group);
        return it != group_index.end() && it->second < stage_groups;
      };

      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (Param* p : params) {
          if (!trainable(*p)) continue;
          for (double g : p->g.v) sq += g * g;
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          const double scale = cfg.clip_norm / norm;
          for (Param* p : params) {
            if (!trainable(*p)) continue;
            for (double& g : p->g.v) g *= scale;
          }
        }
      }

      const double base_lr =
          cfg.schedule == ScheduleKind::Stlr ? stlr(global_step, stlr_cfg) : cfg.optimizer.lr;
      std::vector<double> group_lrs(groups.size(), base_lr);
      if (cfg.disc_decay > 0.0)
        group_lrs = discriminative_lrs(base_lr, cfg.disc_decay, groups.size());

      try {
        for (Param* p : params) {
          if (!trainable(*p)) continue;
          optimizer.step(*p, group_lrs[group_index[p->group]]);
        }
      } catch (const NonFiniteError&) {
        bad = true;
        break;
      }
      ++global_step;
    }

    if (bad) {
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.dev_weighted_f1 = dev_weighted_f1(bundle, dev_set, external ? dev_features : nullptr);
    result.history.push_back(stats);

    if (stats.dev_weighted_f1 > result.best_dev_f1 || result.best_epoch == 0) {
      result.best_dev_f1 = stats.dev_weighted_f1;
      result.best_epoch = stats.epoch;
      result.model = bundle;
    }
  }

  if (result.best_epoch == 0) result.model = init;  // diverged before finishing epoch 1
  result.model.meta()["best_epoch"] = std::to_string(result.best_epoch);
  result.model.meta()["seed"] = std::to_string(cfg.seed);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", result.best_dev_f1);
  result.model.meta()["dev_weighted_f1"] = buf;
  return result;
}

double pretrain_language_model(ModelBundle& bundle, const corpus::LabeledCorpus& corpus,
                               const TrainConfig& cfg, Rng& rng) {
  if (!bundle.vocab()) throw ConfigError("language-model pretraining needs a vocabulary");
  const encoder::Vocabulary& vocab = *bundle.vocab();
  const std::size_t v = vocab.size();
  const std::size_t d = bundle.config().backbone.dim;
  const std::size_t u = cfg.lm_units;
  const double drop_rate = cfg.lm_dropout * cfg.lm_dropout_multiplier;

  // One long id stream; each record keeps its CLS/SEP boundary markers.
  std::vector<int> stream;
  for (const corpus::LabeledRecord& r : corpus.records) {
    const encoder::TokenSequence seq = bundle.encode_text(r.text);
    for (std::size_t i = 0; i < seq.real_len; ++i) stream.push_back(seq.ids[i]);
  }
  if (stream.size() < cfg.lm_bptt + 1)
    throw InsufficientDataError("corpus too small for language-model pretraining");

  Param* tok_embed = nullptr;
  for (Param* p : bundle.params()) {
    if (p->name == "embed.tok") tok_embed = p;
  }
  if (!tok_embed) throw ConfigError("bundle has no token embedding table to pretrain");

  LstmCell cell("lm.lstm.", "lm", d, u, rng);
  Param proj_w("lm.proj.w", "lm", {u, v});
  init_uniform_fan_in(proj_w.w, u, rng);
  Param proj_b("lm.proj.b", "lm", {v});

  OptimizerConfig opt = cfg.optimizer;
  opt.lr = cfg.lm_lr;
  opt.beta2 = 0.99;
  AdamW optimizer(opt);

  const std::size_t windows = (stream.size() - 1) / cfg.lm_bptt;
  double final_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.lm_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t begin = w * cfg.lm_bptt;
      const std::size_t len = std::min(cfg.lm_bptt, stream.size() - 1 - begin);

      tok_embed->zero_grad();
      for (Param* p : cell.params()) p->zero_grad();
      proj_w.zero_grad();
      proj_b.zero_grad();

      std::vector<double> h(u, 0.0), c(u, 0.0), hn, cn;
      std::vector<LstmStepCache> caches(len);
      std::vector<std::vector<double>> drops(len);
      std::vector<std::vector<double>> dh_out(len);
      const double inv_len = 1.0 / static_cast<double>(len);

      for (std::size_t t = 0; t < len; ++t) {
        const int id = stream[begin + t];
        const int target = stream[begin + t + 1];
        cell.step(&tok_embed->w.v[static_cast<std::size_t>(id) * d], h, c, &hn, &cn, &caches[t]);
        h = hn;
        c = cn;
        std::vector<double> hidden = h;
        apply_dropout(hidden.data(), u, drop_rate, Mode::Train, &rng, &drops[t]);
        std::vector<double> logits(v);
        linear_forward(proj_w.w, hidden.data(), logits.data());
        for (std::size_t j = 0; j < v; ++j) logits[j] += proj_b.w.v[j];
        auto [loss, probs] = heads::softmax_cross_entropy(logits, static_cast<std::size_t>(target));
        loss_sum += loss;
        ++loss_count;
        std::vector<double> dlogits =
            heads::cross_entropy_grad(probs, static_cast<std::size_t>(target));
        for (double& x : dlogits) x *= inv_len;
        dh_out[t].assign(u, 0.0);
        linear_backward(proj_w.w, proj_w.g, proj_b.g, hidden.data(), dlogits.data(),
                        dh_out[t].data());
        apply_dropout_mask(dh_out[t].data(), drops[t]);
      }

      std::vector<double> dh(u, 0.0), dc(u, 0.0), dh_prev, dc_prev;
      std::vector<double> dx(d);
      for (std::size_t t = len; t-- > 0;) {
        for (std::size_t j = 0; j < u; ++j) dh[j] += dh_out[t][j];
        cell.step_backward(caches[t], dh, dc, dx.data(), &dh_prev, &dc_prev);
        const int id = stream[begin + t];
        double* gr = &tok_embed->g.v[static_cast<std::size_t>(id) * d];
        for (std::size_t j = 0; j < d; ++j) gr[j] += dx[j];
        dh = dh_prev;
        dc = dc_prev;
      }

      optimizer.step(*tok_embed, opt.lr);
      for (Param* p : cell.params()) optimizer.step(*p, opt.lr);
      optimizer.step(proj_w, opt.lr);
      optimizer.step(proj_b, opt.lr);
    }
    final_loss = loss_sum / static_cast<double>(loss_count);
  }
  return final_loss;
}

}  // namespace hsd::train
