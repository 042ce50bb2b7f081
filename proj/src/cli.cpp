#include "hsd/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsd/agreement.hpp"
#include "hsd/corpus.hpp"
#include "hsd/errors.hpp"
#include "hsd/metrics.hpp"
#include "hsd/model.hpp"
#include "hsd/runconfig.hpp"
#include "hsd/train.hpp"
#include "hsd/vocab.hpp"

namespace hsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + tmp);
    out << content;
    if (!out) throw IoError("failed writing file: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move file into place: " + path + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct SchemaFlags {
  std::string lang = "english";
  std::string hope, nothope, other;

  corpus::Language language() const { return corpus::parse_language(lang); }
  corpus::LabelSchema schema() const {
    corpus::LabelSchema s = corpus::LabelSchema::defaults(language());
    if (!hope.empty()) s.surface[static_cast<std::size_t>(corpus::Label::Hope)] = hope;
    if (!nothope.empty()) s.surface[static_cast<std::size_t>(corpus::Label::NotHope)] = nothope;
    if (!other.empty()) s.surface[static_cast<std::size_t>(corpus::Label::OtherLanguage)] = other;
    s.validate();
    return s;
  }
};

void add_schema_flags(CLI::App* sub, SchemaFlags& f) {
  sub->add_option("--lang", f.lang, "corpus language: english, tamil or malayalam");
  sub->add_option("--label-hope", f.hope, "surface spelling of the hope class");
  sub->add_option("--label-nothope", f.nothope, "surface spelling of the non-hope class");
  sub->add_option("--label-other", f.other, "surface spelling of the other-language class");
}

std::vector<std::string> schema_names(const corpus::LabelSchema& schema) {
  return {schema.surface[0], schema.surface[1], schema.surface[2]};
}

void print_load_report(const corpus::LoadReport& report, bool machine) {
  if (machine) {
    std::cout << "lines_seen," << report.lines_seen << '\n';
    std::cout << "records_loaded," << report.records_loaded << '\n';
    std::cout << "rejected_unknown_label," << report.rejected_unknown_label << '\n';
    std::cout << "rejected_malformed," << report.rejected_malformed << '\n';
    return;
  }
  std::cout << "loaded " << report.records_loaded << " records from " << report.lines_seen
            << " data lines";
  if (report.rejected_unknown_label || report.rejected_malformed) {
    std::cout << " (rejected " << report.rejected_unknown_label << " unknown-label, "
              << report.rejected_malformed << " malformed)";
  }
  std::cout << '\n';
  for (const auto& [spelling, count] : report.unknown_labels)
    std::cout << "  unknown label `" << spelling << "` x" << count << '\n';
}

int cmd_ingest(const std::string& input, const SchemaFlags& flags, bool header,
               const std::string& out_dir, const std::string& split_spec, std::uint64_t seed,
               bool stratified, bool machine) {
  const corpus::LabelSchema schema = flags.schema();
  const corpus::LoadResult loaded = corpus::load_tsv(input, flags.language(), schema, header);
  print_load_report(loaded.report, machine);
  std::cout << corpus::render_distribution(corpus::class_distribution(loaded.corpus), machine);

  if (!out_dir.empty()) {
    corpus::SplitSpec spec;
    spec.seed = seed;
    spec.stratified = stratified;
    if (!split_spec.empty()) {
      double a = 0, b = 0, c = 0;
      if (std::sscanf(split_spec.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
        throw ConfigError("--split expects three comma-separated ratios, got `" + split_spec + "`");
      spec.train = a;
      spec.dev = b;
      spec.test = c;
    }
    spec.validate();
    auto [train_c, dev_c, test_c] = corpus::split_corpus(loaded.corpus, spec);
    fs::create_directories(out_dir);
    corpus::save_tsv(train_c, (fs::path(out_dir) / "train.tsv").string());
    corpus::save_tsv(dev_c, (fs::path(out_dir) / "dev.tsv").string());
    corpus::save_tsv(test_c, (fs::path(out_dir) / "test.tsv").string());
    if (machine) {
      std::cout << "split,train," << train_c.size() << '\n';
      std::cout << "split,dev," << dev_c.size() << '\n';
      std::cout << "split,test," << test_c.size() << '\n';
    } else {
      std::cout << "split sizes: train " << train_c.size() << ", dev " << dev_c.size() << ", test "
                << test_c.size() << '\n';
      std::cout << "wrote train.tsv, dev.tsv, test.tsv to " << out_dir << '\n';
    }
  }
  return 0;
}

int cmd_stats(const std::string& input, const SchemaFlags& flags, bool header, bool machine) {
  const corpus::LoadResult loaded =
      corpus::load_tsv(input, flags.language(), flags.schema(), header);
  std::cout << corpus::render_distribution(corpus::class_distribution(loaded.corpus), machine);
  return 0;
}

int cmd_alpha(const std::string& input, bool machine) {
  const agreement::ReliabilityMatrix matrix = agreement::load_reliability_csv(input);
  const double alpha = agreement::krippendorff_alpha(matrix);
  char buf[64];
  std::snprintf(buf, sizeof(buf), machine ? "%.17g" : "%.9f", alpha);
  if (machine)
    std::cout << "alpha," << buf << '\n';
  else
    std::cout << "Krippendorff alpha = " << buf << '\n';
  return 0;
}

json config_json(const RunConfig& cfg) {
  json out = json::object();
  std::istringstream lines(render_config(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

corpus::LoadResult load_split(const RunConfig& cfg, const std::string& path) {
  return corpus::load_tsv(path, cfg.language, cfg.schema(), cfg.header);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& set_pairs,
              const std::map<std::string, std::string>& flag_overrides) {
  RunConfig cfg = parse_config_file(config_path);
  if (const char* env_seed = std::getenv("SEED")) apply_override(cfg, "seed", env_seed);
  for (const std::string& pair : set_pairs) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got `" + pair + "`");
    apply_override(cfg, pair.substr(0, eq), pair.substr(eq + 1));
  }
  for (const auto& [key, value] : flag_overrides) apply_override(cfg, key, value);

  if (cfg.train_path.empty()) throw ConfigError("missing required key `train` in [data]");
  if (cfg.dev_path.empty()) throw ConfigError("missing required key `dev` in [data]");

  const corpus::LabeledCorpus train_c = load_split(cfg, cfg.train_path).corpus;
  const corpus::LabeledCorpus dev_c = load_split(cfg, cfg.dev_path).corpus;

  std::optional<encoder::Vocabulary> vocab;
  if (cfg.model.backbone.kind == encoder::BackboneKind::SmallTransformer) {
    std::vector<std::string> texts;
    texts.reserve(train_c.size());
    for (const auto& r : train_c.records) texts.push_back(r.text);
    encoder::VocabBuildOptions vopts;
    vopts.target_size = cfg.vocab_size;
    vopts.min_pair_frequency = cfg.min_pair_frequency;
    vopts.lowercase = cfg.model.tokenizer.lowercase;
    vocab = encoder::build_vocabulary(texts, vopts);
  }

  train::ModelBundle bundle =
      train::ModelBundle::create(cfg.model, cfg.language, cfg.schema(), vocab, cfg.train.seed);

  std::vector<encoder::EncoderOutput> train_feat, dev_feat, test_feat;
  const bool external = cfg.model.backbone.kind == encoder::BackboneKind::ExternalEmbeddings;
  if (external) {
    if (cfg.embeddings_train.empty() || cfg.embeddings_dev.empty())
      throw ConfigError("external-embeddings runs need embeddings_train and embeddings_dev");
    train_feat = train::load_external_features(cfg.embeddings_train, train_c.size(),
                                               cfg.model.tokenizer.max_len,
                                               cfg.model.backbone.pooling);
    dev_feat = train::load_external_features(cfg.embeddings_dev, dev_c.size(),
                                             cfg.model.tokenizer.max_len,
                                             cfg.model.backbone.pooling);
  }

  train::TrainResult result = train::fit(bundle, train_c, dev_c, cfg.train,
                                         external ? &train_feat : nullptr,
                                         external ? &dev_feat : nullptr);

  std::cout << train::render_history(result.history);
  if (result.diverged) std::cout << "training diverged; keeping the last good snapshot\n";
  std::cout << "best epoch " << result.best_epoch << ", dev weighted F1 ";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", result.best_dev_f1);
  std::cout << buf << '\n';

  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  result.model.save((out / "model.ckpt").string());
  atomic_write((out / "history.csv").string(), train::render_history(result.history));

  // Dev report from the selected snapshot.
  std::vector<corpus::Label> gold, pred;
  for (std::size_t i = 0; i < dev_c.size(); ++i) {
    gold.push_back(dev_c.records[i].label);
    pred.push_back(external ? result.model.predict_features_one(dev_feat[i]).label
                            : result.model.predict_one(dev_c.records[i].text).label);
  }
  const metrics::EvaluationReport dev_report =
      metrics::aggregate_report(metrics::confusion(gold, pred));
  atomic_write((out / "report.txt").string(),
               metrics::render_report(dev_report, schema_names(bundle.schema())));

  json metrics_obj = {
      {"dev_weighted_f1", dev_report.weighted.f1},
      {"best_epoch", result.best_epoch},
      {"diverged", result.diverged},
      {"test_weighted_f1", nullptr},
  };
  if (!result.history.empty())
    metrics_obj["final_train_loss"] = result.history.back().train_loss;
  if (cfg.train.lm_pretrain) metrics_obj["lm_loss"] = result.lm_loss;

  if (!cfg.test_path.empty()) {
    const corpus::LabeledCorpus test_c = load_split(cfg, cfg.test_path).corpus;
    if (external) {
      if (cfg.embeddings_test.empty())
        throw ConfigError("external-embeddings runs need embeddings_test to score the test split");
      test_feat = train::load_external_features(cfg.embeddings_test, test_c.size(),
                                                cfg.model.tokenizer.max_len,
                                                cfg.model.backbone.pooling);
    }
    std::vector<corpus::Label> tg, tp;
    for (std::size_t i = 0; i < test_c.size(); ++i) {
      tg.push_back(test_c.records[i].label);
      tp.push_back(external ? result.model.predict_features_one(test_feat[i]).label
                            : result.model.predict_one(test_c.records[i].text).label);
    }
    const metrics::EvaluationReport test_report =
        metrics::aggregate_report(metrics::confusion(tg, tp));
    atomic_write((out / "report_test.txt").string(),
                 metrics::render_report(test_report, schema_names(bundle.schema())));
    metrics_obj["test_weighted_f1"] = test_report.weighted.f1;
  }

  json manifest = {
      {"command", "train"},
      {"architecture", train::to_string(cfg.model.head)},
      {"embedding", encoder::to_string(cfg.model.backbone.kind)},
      {"seed", cfg.train.seed},
      {"config", config_json(cfg)},
      {"metrics", metrics_obj},
      {"files",
       {{"checkpoint", "model.ckpt"}, {"history", "history.csv"}, {"report", "report.txt"}}},
  };
  atomic_write((out / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "run written to " << cfg.out_dir << '\n';
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_path, bool header,
                 const std::string& embeddings_dir, const std::string& out_dir, bool machine) {
  const train::ModelBundle bundle = train::ModelBundle::load(checkpoint);
  const corpus::LoadResult loaded =
      corpus::load_tsv(data_path, bundle.language(), bundle.schema(), header);
  const corpus::LabeledCorpus& data = loaded.corpus;

  const bool external =
      bundle.config().backbone.kind == encoder::BackboneKind::ExternalEmbeddings;
  std::vector<encoder::EncoderOutput> features;
  if (external) {
    if (embeddings_dir.empty())
      throw ConfigError("this checkpoint consumes external embeddings; pass --embeddings DIR");
    features = train::load_external_features(embeddings_dir, data.size(),
                                             bundle.config().tokenizer.max_len,
                                             bundle.config().backbone.pooling);
  }

  std::vector<corpus::Label> gold, pred;
  for (std::size_t i = 0; i < data.size(); ++i) {
    gold.push_back(data.records[i].label);
    pred.push_back(external ? bundle.predict_features_one(features[i]).label
                            : bundle.predict_one(data.records[i].text).label);
  }
  const metrics::EvaluationReport report =
      metrics::aggregate_report(metrics::confusion(gold, pred));
  const std::vector<std::string> names = schema_names(bundle.schema());
  const std::string rendered =
      machine ? metrics::render_report_rows(report, names) : metrics::render_report(report, names);
  std::cout << rendered;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    atomic_write((fs::path(out_dir) / "report.txt").string(),
                 metrics::render_report(report, names));
  }
  return 0;
}

int cmd_predict(const std::string& checkpoint, std::vector<std::string> texts,
                const std::string& in_file, const std::string& embeddings_file, bool machine) {
  const train::ModelBundle bundle = train::ModelBundle::load(checkpoint);
  const bool external =
      bundle.config().backbone.kind == encoder::BackboneKind::ExternalEmbeddings;

  std::vector<train::Prediction> preds;
  if (external) {
    if (embeddings_file.empty())
      throw ConfigError("this checkpoint consumes external embeddings; pass --embeddings FILE");
    preds.push_back(bundle.predict_features_one(
        encoder::encode_external(encoder::load_external_embeddings(embeddings_file),
                                 bundle.config().tokenizer.max_len,
                                 bundle.config().backbone.pooling)));
  } else {
    if (!in_file.empty()) {
      std::istringstream in(read_text_file(in_file));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        texts.push_back(line);
      }
    }
    preds = train::predict(bundle, texts);
  }

  if (machine) std::cout << "label,p_hope,p_nothope,p_other\n";
  char buf[64];
  for (const train::Prediction& p : preds) {
    std::cout << bundle.schema().surface_of(p.label);
    for (double prob : p.probs) {
      std::snprintf(buf, sizeof(buf), "%.6f", prob);
      std::cout << (machine ? "," : "  ") << buf;
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_compare(const std::string& dir, bool machine) {
  std::vector<metrics::RunSummary> runs;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> manifest_paths;
  const fs::path direct = fs::path(dir) / "manifest.json";
  if (fs::exists(direct)) manifest_paths.push_back(direct);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const fs::path p = entry.path() / "manifest.json";
    if (fs::exists(p)) manifest_paths.push_back(p);
  }
  if (manifest_paths.empty()) throw IoError("no manifest.json found under " + dir);
  for (const fs::path& p : manifest_paths) {
    json manifest;
    try {
      manifest = json::parse(read_text_file(p.string()));
    } catch (const json::parse_error& e) {
      throw IoError("bad manifest " + p.string() + ": " + e.what());
    }
    metrics::RunSummary run;
    run.architecture = manifest.value("architecture", "?");
    run.embedding = manifest.value("embedding", "?");
    if (manifest.contains("metrics")) {
      const json& m = manifest["metrics"];
      run.dev_weighted_f1 = m.value("dev_weighted_f1", 0.0);
      if (m.contains("test_weighted_f1") && !m["test_weighted_f1"].is_null()) {
        run.test_weighted_f1 = m["test_weighted_f1"].get<double>();
        run.has_test = true;
      }
    }
    runs.push_back(std::move(run));
  }
  std::cout << metrics::render_comparison(std::move(runs), machine);
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"hope-speech detection toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load a TSV corpus, report it, optionally split it");
  std::string ingest_input, ingest_out, ingest_split;
  SchemaFlags ingest_schema;
  bool ingest_header = false, ingest_stratified = false, ingest_machine = false;
  std::uint64_t ingest_seed = 0;
  ingest->add_option("input", ingest_input, "corpus TSV file")->required();
  add_schema_flags(ingest, ingest_schema);
  ingest->add_flag("--header", ingest_header, "skip the first line");
  ingest->add_option("--out", ingest_out, "write train/dev/test TSVs into this directory");
  ingest->add_option("--split", ingest_split, "ratios as train,dev,test (default 0.8,0.1,0.1)");
  ingest->add_option("--seed", ingest_seed, "split shuffle seed");
  ingest->add_flag("--stratified", ingest_stratified, "stratify the split per class");
  ingest->add_flag("--machine", ingest_machine, "machine-readable output");

  // stats
  auto* stats = app.add_subcommand("stats", "class distribution of a corpus TSV");
  std::string stats_input;
  SchemaFlags stats_schema;
  bool stats_header = false, stats_machine = false;
  stats->add_option("input", stats_input, "corpus TSV file")->required();
  add_schema_flags(stats, stats_schema);
  stats->add_flag("--header", stats_header, "skip the first line");
  stats->add_flag("--machine", stats_machine, "machine-readable output");

  // alpha
  auto* alpha = app.add_subcommand("alpha", "Krippendorff's alpha over an annotation CSV");
  std::string alpha_input;
  bool alpha_machine = false;
  alpha->add_option("input", alpha_input, "CSV, one row per item, one column per annotator")
      ->required();
  alpha->add_flag("--machine", alpha_machine, "machine-readable output");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a classifier from a config file");
  std::string train_config;
  std::vector<std::string> train_sets;
  std::string f_seed, f_epochs, f_batch, f_lr, f_head, f_schedule, f_out, f_max_len;
  train_cmd->add_option("--config", train_config, "run config file")->required();
  train_cmd->add_option("--set", train_sets, "override any config key as key=value");
  train_cmd->add_option("--seed", f_seed, "override the seed");
  train_cmd->add_option("--epochs", f_epochs, "override the epoch count");
  train_cmd->add_option("--batch-size", f_batch, "override the batch size");
  train_cmd->add_option("--lr", f_lr, "override the learning rate");
  train_cmd->add_option("--head", f_head, "override the head kind (dense or bilstm)");
  train_cmd->add_option("--schedule", f_schedule, "override the schedule (constant or stlr)");
  train_cmd->add_option("--out", f_out, "override the output directory");
  train_cmd->add_option("--max-len", f_max_len, "override the sequence length");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a labeled TSV");
  std::string eval_ckpt, eval_data, eval_embeddings, eval_out;
  bool eval_header = false, eval_machine = false;
  evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  evaluate->add_option("--data", eval_data, "labeled TSV to score")->required();
  evaluate->add_flag("--header", eval_header, "skip the first line");
  evaluate->add_option("--embeddings", eval_embeddings,
                       "directory of <index>.vec files (external-embeddings checkpoints)");
  evaluate->add_option("--out", eval_out, "also write report.txt into this directory");
  evaluate->add_flag("--machine", eval_machine, "machine-readable output");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "label texts with a checkpoint");
  std::string pred_ckpt, pred_in, pred_embeddings;
  std::vector<std::string> pred_texts;
  bool pred_machine = false;
  predict_cmd->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required();
  predict_cmd->add_option("texts", pred_texts, "texts to classify");
  predict_cmd->add_option("--in", pred_in, "file with one text per line");
  predict_cmd->add_option("--embeddings", pred_embeddings,
                          "a .vec file (external-embeddings checkpoints)");
  predict_cmd->add_flag("--machine", pred_machine, "machine-readable output");

  // compare
  auto* compare = app.add_subcommand("compare", "rank run manifests by test weighted F1");
  std::string compare_dir;
  bool compare_machine = false;
  compare->add_option("dir", compare_dir, "directory containing run directories")->required();
  compare->add_flag("--machine", compare_machine, "machine-readable output");

  try {
    std::vector<const char*> argv;
    argv.push_back("hsd");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed())
      return cmd_ingest(ingest_input, ingest_schema, ingest_header, ingest_out, ingest_split,
                        ingest_seed, ingest_stratified, ingest_machine);
    if (stats->parsed()) return cmd_stats(stats_input, stats_schema, stats_header, stats_machine);
    if (alpha->parsed()) return cmd_alpha(alpha_input, alpha_machine);
    if (train_cmd->parsed()) {
      std::map<std::string, std::string> overrides;
      if (!f_seed.empty()) overrides["seed"] = f_seed;
      if (!f_epochs.empty()) overrides["epochs"] = f_epochs;
      if (!f_batch.empty()) overrides["batch_size"] = f_batch;
      if (!f_lr.empty()) overrides["lr"] = f_lr;
      if (!f_head.empty()) overrides["head"] = f_head;
      if (!f_schedule.empty()) overrides["schedule"] = f_schedule;
      if (!f_out.empty()) overrides["dir"] = f_out;
      if (!f_max_len.empty()) overrides["max_len"] = f_max_len;
      return cmd_train(train_config, train_sets, overrides);
    }
    if (evaluate->parsed())
      return cmd_evaluate(eval_ckpt, eval_data, eval_header, eval_embeddings, eval_out,
                          eval_machine);
    if (predict_cmd->parsed())
      return cmd_predict(pred_ckpt, pred_texts, pred_in, pred_embeddings, pred_machine);
    if (compare->parsed()) return cmd_compare(compare_dir, compare_machine);
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hsd::cli
