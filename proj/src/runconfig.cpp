#include "hsd/runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd::cli {

corpus::LabelSchema RunConfig::schema() const {
  corpus::LabelSchema s = corpus::LabelSchema::defaults(language);
  if (label_hope) s.surface[static_cast<std::size_t>(corpus::Label::Hope)] = *label_hope;
  if (label_nothope) s.surface[static_cast<std::size_t>(corpus::Label::NotHope)] = *label_nothope;
  if (label_other) s.surface[static_cast<std::size_t>(corpus::Label::OtherLanguage)] = *label_other;
  s.validate();
  return s;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("key `" + key + "` expects a boolean, got `" + value + "`");
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "` expects a non-negative integer, got `" + value + "`");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  return parse_size(key, value);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "` expects a number, got `" + value + "`");
  }
}

std::vector<encoder::ConvSpec> parse_convs(const std::string& key, const std::string& value) {
  std::vector<encoder::ConvSpec> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("key `" + key + "` expects width:filters pairs, got `" + item + "`");
    out.push_back({parse_size(key, trim(item.substr(0, colon))),
                   parse_size(key, trim(item.substr(colon + 1)))});
  }
  if (out.empty()) throw ConfigError("key `" + key + "` expects at least one width:filters pair");
  return out;
}

std::string convs_to_string(const std::vector<encoder::ConvSpec>& convs) {
  std::string out;
  for (const auto& c : convs) {
    if (!out.empty()) out += ',';
    out += std::to_string(c.width) + ':' + std::to_string(c.filters);
  }
  return out;
}

struct KeySpec {
  const char* section;
  std::function<void(RunConfig&, const std::string&)> apply;
  std::function<std::string(const RunConfig&)> render;
};

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    auto fmt_double = [](double x) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      return std::string(buf);
    };
    auto add = [&](const char* section, const char* key,
                   std::function<void(RunConfig&, const std::string&)> apply,
                   std::function<std::string(const RunConfig&)> render) {
      t.emplace(key, KeySpec{section, std::move(apply), std::move(render)});
    };

    add("data", "language",
        [](RunConfig& c, const std::string& v) { c.language = corpus::parse_language(v); },
        [](const RunConfig& c) { return std::string(corpus::language_name(c.language)); });
    add("data", "train", [](RunConfig& c, const std::string& v) { c.train_path = v; },
        [](const RunConfig& c) { return c.train_path; });
    add("data", "dev", [](RunConfig& c, const std::string& v) { c.dev_path = v; },
        [](const RunConfig& c) { return c.dev_path; });
    add("data", "test", [](RunConfig& c, const std::string& v) { c.test_path = v; },
        [](const RunConfig& c) { return c.test_path; });
    add("data", "header",
        [](RunConfig& c, const std::string& v) { c.header = parse_bool("header", v); },
        [](const RunConfig& c) { return c.header ? "1" : "0"; });
    add("data", "label_hope", [](RunConfig& c, const std::string& v) { c.label_hope = v; },
        [](const RunConfig& c) { return c.label_hope.value_or(""); });
    add("data", "label_nothope", [](RunConfig& c, const std::string& v) { c.label_nothope = v; },
        [](const RunConfig& c) { return c.label_nothope.value_or(""); });
    add("data", "label_other", [](RunConfig& c, const std::string& v) { c.label_other = v; },
        [](const RunConfig& c) { return c.label_other.value_or(""); });
    add("data", "embeddings_train",
        [](RunConfig& c, const std::string& v) { c.embeddings_train = v; },
        [](const RunConfig& c) { return c.embeddings_train; });
    add("data", "embeddings_dev", [](RunConfig& c, const std::string& v) { c.embeddings_dev = v; },
        [](const RunConfig& c) { return c.embeddings_dev; });
    add("data", "embeddings_test",
        [](RunConfig& c, const std::string& v) { c.embeddings_test = v; },
        [](const RunConfig& c) { return c.embeddings_test; });

    add("model", "backbone",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.kind = encoder::backbone_kind_from_string(v);
        },
        [](const RunConfig& c) { return encoder::to_string(c.model.backbone.kind); });
    add("model", "layers",
        [](RunConfig& c, const std::string& v) { c.model.backbone.layers = parse_size("layers", v); },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.layers); });
    add("model", "heads",
        [](RunConfig& c, const std::string& v) { c.model.backbone.heads = parse_size("heads", v); },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.heads); });
    add("model", "dim",
        [](RunConfig& c, const std::string& v) { c.model.backbone.dim = parse_size("dim", v); },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.dim); });
    add("model", "ff_dim",
        [](RunConfig& c, const std::string& v) { c.model.backbone.ff_dim = parse_size("ff_dim", v); },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.ff_dim); });
    add("model", "dropout",
        [](RunConfig& c, const std::string& v) { c.model.backbone.dropout = parse_double("dropout", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.model.backbone.dropout); });
    add("model", "pooling",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.pooling = encoder::pooling_from_string(v);
        },
        [](const RunConfig& c) { return encoder::to_string(c.model.backbone.pooling); });
    add("model", "head",
        [](RunConfig& c, const std::string& v) { c.model.head = train::head_kind_from_string(v); },
        [](const RunConfig& c) { return train::to_string(c.model.head); });
    add("model", "dense_hidden",
        [](RunConfig& c, const std::string& v) { c.model.dense_hidden = parse_size("dense_hidden", v); },
        [](const RunConfig& c) { return std::to_string(c.model.dense_hidden); });
    add("model", "lstm_units",
        [](RunConfig& c, const std::string& v) { c.model.lstm_units = parse_size("lstm_units", v); },
        [](const RunConfig& c) { return std::to_string(c.model.lstm_units); });
    add("model", "head_dropout",
        [](RunConfig& c, const std::string& v) { c.model.head_dropout = parse_double("head_dropout", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.model.head_dropout); });
    add("model", "max_len",
        [](RunConfig& c, const std::string& v) { c.model.tokenizer.max_len = parse_size("max_len", v); },
        [](const RunConfig& c) { return std::to_string(c.model.tokenizer.max_len); });
    add("model", "lowercase",
        [](RunConfig& c, const std::string& v) {
          c.model.tokenizer.lowercase = parse_bool("lowercase", v);
        },
        [](const RunConfig& c) { return c.model.tokenizer.lowercase ? "1" : "0"; });
    add("model", "max_chars_per_word",
        [](RunConfig& c, const std::string& v) {
          c.model.tokenizer.max_chars_per_word = parse_size("max_chars_per_word", v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.tokenizer.max_chars_per_word); });
    add("model", "vocab_size",
        [](RunConfig& c, const std::string& v) { c.vocab_size = parse_size("vocab_size", v); },
        [](const RunConfig& c) { return std::to_string(c.vocab_size); });
    add("model", "min_pair_frequency",
        [](RunConfig& c, const std::string& v) {
          c.min_pair_frequency = parse_size("min_pair_frequency", v);
        },
        [](const RunConfig& c) { return std::to_string(c.min_pair_frequency); });
    add("model", "cc_embed_dim",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.char_cnn.char_embed_dim = parse_size("cc_embed_dim", v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.char_cnn.char_embed_dim); });
    add("model", "cc_convs",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.char_cnn.convolutions = parse_convs("cc_convs", v);
        },
        [](const RunConfig& c) { return convs_to_string(c.model.backbone.char_cnn.convolutions); });
    add("model", "cc_highway",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.char_cnn.highway_layers = parse_size("cc_highway", v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.char_cnn.highway_layers); });
    add("model", "cc_max_chars",
        [](RunConfig& c, const std::string& v) {
          c.model.backbone.char_cnn.max_token_chars = parse_size("cc_max_chars", v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.backbone.char_cnn.max_token_chars); });

    add("train", "batch_size",
        [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_size("batch_size", v); },
        [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
    add("train", "epochs",
        [](RunConfig& c, const std::string& v) { c.train.epochs = parse_size("epochs", v); },
        [](const RunConfig& c) { return std::to_string(c.train.epochs); });
    add("train", "seed",
        [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); });
    add("train", "lr",
        [](RunConfig& c, const std::string& v) { c.train.optimizer.lr = parse_double("lr", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.optimizer.lr); });
    add("train", "beta1",
        [](RunConfig& c, const std::string& v) { c.train.optimizer.beta1 = parse_double("beta1", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.optimizer.beta1); });
    add("train", "beta2",
        [](RunConfig& c, const std::string& v) { c.train.optimizer.beta2 = parse_double("beta2", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.optimizer.beta2); });
    add("train", "eps",
        [](RunConfig& c, const std::string& v) { c.train.optimizer.eps = parse_double("eps", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.optimizer.eps); });
    add("train", "weight_decay",
        [](RunConfig& c, const std::string& v) {
          c.train.optimizer.weight_decay = parse_double("weight_decay", v);
        },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.optimizer.weight_decay); });
    add("train", "schedule",
        [](RunConfig& c, const std::string& v) {
          c.train.schedule = train::schedule_kind_from_string(v);
        },
        [](const RunConfig& c) { return train::to_string(c.train.schedule); });
    add("train", "stlr_cut_frac",
        [](RunConfig& c, const std::string& v) { c.train.stlr_cut_frac = parse_double("stlr_cut_frac", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.stlr_cut_frac); });
    add("train", "stlr_ratio",
        [](RunConfig& c, const std::string& v) { c.train.stlr_ratio = parse_double("stlr_ratio", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.stlr_ratio); });
    add("train", "stlr_lr_max",
        [](RunConfig& c, const std::string& v) { c.train.stlr_lr_max = parse_double("stlr_lr_max", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.stlr_lr_max); });
    add("train", "stlr_lr_floor",
        [](RunConfig& c, const std::string& v) {
          c.train.stlr_lr_floor = parse_double("stlr_lr_floor", v);
        },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.stlr_lr_floor); });
    add("train", "disc_decay",
        [](RunConfig& c, const std::string& v) { c.train.disc_decay = parse_double("disc_decay", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.disc_decay); });
    add("train", "unfreeze_epochs_per_stage",
        [](RunConfig& c, const std::string& v) {
          c.train.unfreeze_epochs_per_stage = parse_size("unfreeze_epochs_per_stage", v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.unfreeze_epochs_per_stage); });
    add("train", "clip_norm",
        [](RunConfig& c, const std::string& v) { c.train.clip_norm = parse_double("clip_norm", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.clip_norm); });
    add("train", "lm_pretrain",
        [](RunConfig& c, const std::string& v) { c.train.lm_pretrain = parse_bool("lm_pretrain", v); },
        [](const RunConfig& c) { return c.train.lm_pretrain ? "1" : "0"; });
    add("train", "lm_epochs",
        [](RunConfig& c, const std::string& v) { c.train.lm_epochs = parse_size("lm_epochs", v); },
        [](const RunConfig& c) { return std::to_string(c.train.lm_epochs); });
    add("train", "lm_units",
        [](RunConfig& c, const std::string& v) { c.train.lm_units = parse_size("lm_units", v); },
        [](const RunConfig& c) { return std::to_string(c.train.lm_units); });
    add("train", "lm_bptt",
        [](RunConfig& c, const std::string& v) { c.train.lm_bptt = parse_size("lm_bptt", v); },
        [](const RunConfig& c) { return std::to_string(c.train.lm_bptt); });
    add("train", "lm_lr",
        [](RunConfig& c, const std::string& v) { c.train.lm_lr = parse_double("lm_lr", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.lm_lr); });
    add("train", "lm_dropout",
        [](RunConfig& c, const std::string& v) { c.train.lm_dropout = parse_double("lm_dropout", v); },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.lm_dropout); });
    add("train", "lm_dropout_multiplier",
        [](RunConfig& c, const std::string& v) {
          c.train.lm_dropout_multiplier = parse_double("lm_dropout_multiplier", v);
        },
        [fmt_double](const RunConfig& c) { return fmt_double(c.train.lm_dropout_multiplier); });

    add("output", "dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
        [](const RunConfig& c) { return c.out_dir; });
    return t;
  }();
  return table;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key `" + key + "`");
  it->second.apply(cfg, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  const auto& table = key_table();
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "train" && section != "output")
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown section [" + section +
                          "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key `" + key +
                        "` appears before any [section]");
    auto it = table.find(key);
    if (it == table.end() || it->second.section != section)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key `" + key +
                        "` in [" + section + "]");
    it->second.apply(cfg, value);
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  const auto& table = key_table();
  const char* sections[] = {"data", "model", "train", "output"};
  std::ostringstream out;
  for (const char* section : sections) {
    for (const auto& [key, spec] : table) {
      if (std::string(spec.section) != section) continue;
      out << section << '.' << key << '=' << spec.render(cfg) << '\n';
    }
  }
  return out.str();
}

}  // namespace hsd::cli
