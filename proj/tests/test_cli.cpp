#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "hsd/cli.hpp"
#include "hsd/errors.hpp"
#include "hsd/runconfig.hpp"
#include "testutil.hpp"

using namespace hsd;
using namespace hsd::cli;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
};

CliResult run_cli(const std::vector<std::string>& args) {
  testutil::CaptureStdout capture;
  CliResult r;
  r.code = dispatch(args);
  r.out = capture.text();
  return r;
}

std::string fixture(const std::string& name) {
  return std::string(HSD_FIXTURE_DIR) + "/" + name;
}

// Six records: 3 Hope, 2 NotHope, 1 OtherLanguage, English surfaces.
std::string small_tsv() {
  return "hope for all\tHope_speech\n"
         "things will improve\tHope_speech\n"
         "we will be fine\tHope_speech\n"
         "this is terrible\tNon_hope_speech\n"
         "nothing matters\tNon_hope_speech\n"
         "zorkel blint\tnot-English\n";
}

std::string separable_tsv(std::size_t n, unsigned salt) {
  static const char* words[3][3] = {
      {"good", "great", "fine"},
      {"bad", "awful", "sad"},
      {"zounq", "qarzik", "vrelko"},
  };
  static const char* labels[3] = {"Hope_speech", "Non_hope_speech", "not-English"};
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % 3;
    out += words[cls][(i + salt) % 3];
    out += ' ';
    out += words[cls][(i + salt + 1) % 3];
    out += '\t';
    out += labels[cls];
    out += '\n';
  }
  return out;
}

std::string train_config(const std::string& train, const std::string& dev,
                         const std::string& test, const std::string& out_dir,
                         std::size_t epochs, std::uint64_t seed) {
  std::string cfg;
  cfg += "[data]\n";
  cfg += "language = english\n";
  cfg += "train = " + train + "\n";
  cfg += "dev = " + dev + "\n";
  if (!test.empty()) cfg += "test = " + test + "\n";
  cfg += "\n[model]\n";
  cfg += "backbone = small-transformer\n";
  cfg += "layers = 1\n";
  cfg += "heads = 2\n";
  cfg += "dim = 16\n";
  cfg += "ff_dim = 32\n";
  cfg += "dropout = 0\n";
  cfg += "head = dense\n";
  cfg += "dense_hidden = 16\n";
  cfg += "head_dropout = 0\n";
  cfg += "max_len = 8\n";
  cfg += "vocab_size = 64\n";
  cfg += "\n[train]\n";
  cfg += "batch_size = 4\n";
  cfg += "epochs = " + std::to_string(epochs) + "\n";
  cfg += "lr = 0.001\n";
  cfg += "seed = " + std::to_string(seed) + "\n";
  cfg += "\n[output]\n";
  cfg += "dir = " + out_dir + "\n";
  return cfg;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run config defaults") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("run.cfg"), "[data]\ntrain = a.tsv\ndev = b.tsv\n");
  RunConfig cfg = parse_config_file(dir.file("run.cfg"));
  CHECK(cfg.language == corpus::Language::English);
  CHECK(cfg.train_path == "a.tsv");
  CHECK(cfg.dev_path == "b.tsv");
  CHECK(cfg.header == false);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.epochs == 5);
  CHECK(cfg.train.optimizer.lr == 2e-5);
  CHECK(cfg.train.optimizer.weight_decay == 0.01);
  CHECK(cfg.model.tokenizer.max_len == 128);
  CHECK(cfg.model.tokenizer.lowercase == true);
  CHECK(cfg.vocab_size == 2048);
  CHECK(cfg.out_dir == "run-out");
}

TEST_CASE("config parsing reports file, line and offending key") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[train]\nepocs = 5\n", "run.cfg"),
                       doctest::Contains("epocs"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[train]\nepocs = 5\n", "run.cfg"),
                       doctest::Contains("run.cfg:2"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[trian]\n", "x"),
                       doctest::Contains("unknown section"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "epochs = 5\n", "x"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[train]\nnonsense line\n", "x"),
                       doctest::Contains("x:2"), ConfigError);
  // A key must sit in its own section.
  CHECK_THROWS_AS(apply_config_text(cfg, "[data]\nepochs = 5\n", "x"), ConfigError);
}

TEST_CASE("overrides beat the file which beats the defaults") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("run.cfg"),
                       "[train]\nseed = 5\nepochs = 3\n[output]\ndir = from-file\n");
  RunConfig cfg = parse_config_file(dir.file("run.cfg"));
  CHECK(cfg.train.seed == 5);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.out_dir == "from-file");

  apply_override(cfg, "seed", "9");
  apply_override(cfg, "dir", "from-flag");
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.out_dir == "from-flag");

  CHECK_THROWS_WITH_AS(apply_override(cfg, "sede", "1"), doctest::Contains("sede"),
                       ConfigError);

  const std::string rendered = render_config(cfg);
  CHECK(rendered.find("train.seed=9\n") != std::string::npos);
  CHECK(rendered.find("train.epochs=3\n") != std::string::npos);
  CHECK(rendered.find("output.dir=from-flag\n") != std::string::npos);
  CHECK(rendered.find("data.language=english\n") != std::string::npos);
}

TEST_CASE("dispatch exit codes") {
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"stats"}).code == 1);
  CHECK(run_cli({"stats", "/nonexistent/corpus.tsv"}).code == 1);
  CHECK(run_cli({"alpha", "/nonexistent/matrix.csv"}).code == 1);
}

TEST_CASE("stats prints the class distribution") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("c.tsv"), small_tsv());
  CliResult r = run_cli({"stats", dir.file("c.tsv"), "--machine"});
  CHECK(r.code == 0);
  CHECK(r.out ==
        "Hope,3\n"
        "NotHope,2\n"
        "OtherLanguage,1\n"
        "Total,6\n");

  CliResult human = run_cli({"stats", dir.file("c.tsv")});
  CHECK(human.code == 0);
  CHECK(human.out.find("Class") != std::string::npos);
  CHECK(human.out.find("Hope") != std::string::npos);
  CHECK(human.out.find("Total") != std::string::npos);

  // The ingest path surfaces the full load report ahead of the distribution.
  CliResult ingest = run_cli({"ingest", dir.file("c.tsv"), "--machine"});
  CHECK(ingest.code == 0);
  CHECK(ingest.out ==
        "lines_seen,6\n"
        "records_loaded,6\n"
        "rejected_unknown_label,0\n"
        "rejected_malformed,0\n"
        "Hope,3\n"
        "NotHope,2\n"
        "OtherLanguage,1\n"
        "Total,6\n");

  CliResult ingest_human = run_cli({"ingest", dir.file("c.tsv")});
  CHECK(ingest_human.code == 0);
  CHECK(ingest_human.out.find("loaded 6 records from 6 data lines") != std::string::npos);
}

TEST_CASE("alpha command reproduces the two-annotator disagreement fixture") {
  CliResult text = run_cli({"alpha", fixture("alpha_disagree.csv")});
  CHECK(text.code == 0);
  CHECK(text.out == "Krippendorff alpha = -0.500000000\n");

  CliResult machine = run_cli({"alpha", fixture("alpha_disagree.csv"), "--machine"});
  CHECK(machine.code == 0);
  CHECK(machine.out == "alpha,-0.5\n");
}

TEST_CASE("ingest splits a corpus onto disk") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("c.tsv"), separable_tsv(10, 0));
  const std::string out = dir.file("splits");
  CliResult r = run_cli({"ingest", dir.file("c.tsv"), "--out", out, "--machine"});
  CHECK(r.code == 0);
  CHECK(r.out.find("split,train,8\n") != std::string::npos);
  CHECK(r.out.find("split,dev,1\n") != std::string::npos);
  CHECK(r.out.find("split,test,1\n") != std::string::npos);
  CHECK(std::filesystem::exists(out + "/train.tsv"));
  CHECK(std::filesystem::exists(out + "/dev.tsv"));
  CHECK(std::filesystem::exists(out + "/test.tsv"));

  CliResult check = run_cli({"stats", out + "/train.tsv", "--machine"});
  CHECK(check.out.find("Total,8\n") != std::string::npos);
}

TEST_CASE("train writes a complete run directory") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("train.tsv"), separable_tsv(12, 0));
  testutil::write_file(dir.file("dev.tsv"), separable_tsv(6, 1));
  testutil::write_file(dir.file("test.tsv"), separable_tsv(6, 2));
  const std::string out = dir.file("run1");
  testutil::write_file(dir.file("run.cfg"),
                       train_config(dir.file("train.tsv"), dir.file("dev.tsv"),
                                    dir.file("test.tsv"), out, 2, 3));

  CliResult r = run_cli({"train", "--config", dir.file("run.cfg")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch,train_loss,dev_weighted_f1\n") != std::string::npos);
  CHECK(r.out.find("best epoch ") != std::string::npos);
  CHECK(r.out.find("run written to " + out) != std::string::npos);

  CHECK(std::filesystem::exists(out + "/model.ckpt"));
  CHECK(std::filesystem::exists(out + "/history.csv"));
  CHECK(std::filesystem::exists(out + "/report.txt"));
  CHECK(std::filesystem::exists(out + "/report_test.txt"));
  REQUIRE(std::filesystem::exists(out + "/manifest.json"));

  const json manifest = json::parse(testutil::read_file(out + "/manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("architecture") == "dense");
  CHECK(manifest.at("embedding") == "small-transformer");
  CHECK(manifest.at("seed").get<std::uint64_t>() == 3);
  CHECK(manifest.at("metrics").at("dev_weighted_f1").is_number());
  CHECK(manifest.at("metrics").at("test_weighted_f1").is_number());
  CHECK(manifest.at("metrics").at("best_epoch").get<std::size_t>() >= 1);
  CHECK(manifest.at("metrics").at("diverged") == false);
  CHECK(manifest.at("files").at("checkpoint") == "model.ckpt");
  CHECK(manifest.at("config").at("train.seed") == "3");

  const std::string history = testutil::read_file(out + "/history.csv");
  CHECK(history.rfind("epoch,train_loss,dev_weighted_f1\n", 0) == 0);
  CHECK(r.out.find(history) != std::string::npos);

  // Same config, fresh output directory: byte-identical history.
  const std::string out2 = dir.file("run2");
  testutil::write_file(dir.file("run2.cfg"),
                       train_config(dir.file("train.tsv"), dir.file("dev.tsv"),
                                    dir.file("test.tsv"), out2, 2, 3));
  CliResult r2 = run_cli({"train", "--config", dir.file("run2.cfg")});
  REQUIRE(r2.code == 0);
  CHECK(testutil::read_file(out2 + "/history.csv") == history);
}

TEST_CASE("seed precedence: typed flag beats --set beats SEED env beats file") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("train.tsv"), separable_tsv(9, 0));
  testutil::write_file(dir.file("dev.tsv"), separable_tsv(6, 1));

  auto run_with_seed_sources = [&](const std::string& out,
                                   const std::vector<std::string>& extra) {
    testutil::write_file(dir.file(out + ".cfg"),
                         train_config(dir.file("train.tsv"), dir.file("dev.tsv"), "",
                                      dir.file(out), 1, 3));
    std::vector<std::string> args = {"train", "--config", dir.file(out + ".cfg")};
    args.insert(args.end(), extra.begin(), extra.end());
    CliResult r = run_cli(args);
    REQUIRE(r.code == 0);
    const json manifest = json::parse(testutil::read_file(dir.file(out) + "/manifest.json"));
    return manifest.at("seed").get<std::uint64_t>();
  };

  ::setenv("SEED", "99", 1);
  CHECK(run_with_seed_sources("env", {}) == 99);
  CHECK(run_with_seed_sources("set", {"--set", "seed=7"}) == 7);
  CHECK(run_with_seed_sources("flag", {"--set", "seed=7", "--seed", "5"}) == 5);
  ::unsetenv("SEED");
  CHECK(run_with_seed_sources("file", {}) == 3);

  testutil::write_file(dir.file("bad.cfg"),
                       train_config(dir.file("train.tsv"), dir.file("dev.tsv"), "",
                                    dir.file("bad"), 1, 3));
  CHECK(run_cli({"train", "--config", dir.file("bad.cfg"), "--set", "nokey=1"}).code == 1);
}

TEST_CASE("evaluate reproduces the manifest dev score") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("train.tsv"), separable_tsv(12, 0));
  testutil::write_file(dir.file("dev.tsv"), separable_tsv(6, 1));
  const std::string out = dir.file("run");
  testutil::write_file(dir.file("run.cfg"),
                       train_config(dir.file("train.tsv"), dir.file("dev.tsv"), "", out, 2, 4));
  REQUIRE(run_cli({"train", "--config", dir.file("run.cfg")}).code == 0);

  CliResult r = run_cli({"evaluate", "--checkpoint", out + "/model.ckpt", "--data",
                         dir.file("dev.tsv"), "--machine"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("class,precision,recall,f1,support\n", 0) == 0);

  const json manifest = json::parse(testutil::read_file(out + "/manifest.json"));
  const double dev_f1 = manifest.at("metrics").at("dev_weighted_f1").get<double>();
  char want[32];
  std::snprintf(want, sizeof(want), "%.4f", dev_f1);
  const std::size_t row = r.out.find("weighted_avg,");
  REQUIRE(row != std::string::npos);
  const std::string line = r.out.substr(row, r.out.find('\n', row) - row);
  CHECK(line.find(std::string(",") + want + ",") != std::string::npos);
}

TEST_CASE("predict labels texts from the command line and from a file") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("train.tsv"), separable_tsv(12, 0));
  testutil::write_file(dir.file("dev.tsv"), separable_tsv(6, 1));
  const std::string out = dir.file("run");
  testutil::write_file(dir.file("run.cfg"),
                       train_config(dir.file("train.tsv"), dir.file("dev.tsv"), "", out, 1, 5));
  REQUIRE(run_cli({"train", "--config", dir.file("run.cfg")}).code == 0);
  const std::string ckpt = out + "/model.ckpt";

  CliResult r = run_cli({"predict", "--checkpoint", ckpt, "good fine", "--machine"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("label,p_hope,p_nothope,p_other\n", 0) == 0);
  const std::string body = r.out.substr(r.out.find('\n') + 1);
  CHECK(std::count(body.begin(), body.end(), '\n') == 1);
  CHECK(std::count(body.begin(), body.end(), ',') == 3);
  const std::string label = body.substr(0, body.find(','));
  const bool known = label == "Hope_speech" || label == "Non_hope_speech" ||
                     label == "not-English";
  CHECK(known);

  testutil::write_file(dir.file("texts.txt"), "good fine\nbad awful\n");
  CliResult from_file =
      run_cli({"predict", "--checkpoint", ckpt, "--in", dir.file("texts.txt")});
  REQUIRE(from_file.code == 0);
  CHECK(std::count(from_file.out.begin(), from_file.out.end(), '\n') == 2);
}

TEST_CASE("compare ranks manifests under a directory") {
  testutil::TempDir dir;
  std::filesystem::create_directories(dir.file("a"));
  std::filesystem::create_directories(dir.file("b"));
  std::filesystem::create_directories(dir.file("c"));
  testutil::write_file(dir.file("a/manifest.json"),
                       R"({"architecture":"dense","embedding":"subword",
                           "metrics":{"dev_weighted_f1":0.61,"test_weighted_f1":0.59}})");
  testutil::write_file(dir.file("b/manifest.json"),
                       R"({"architecture":"bilstm","embedding":"subword",
                           "metrics":{"dev_weighted_f1":0.58,"test_weighted_f1":0.62}})");
  testutil::write_file(dir.file("c/manifest.json"),
                       R"({"architecture":"dense","embedding":"char",
                           "metrics":{"dev_weighted_f1":0.70,"test_weighted_f1":null}})");

  CliResult r = run_cli({"compare", dir.path().string(), "--machine"});
  REQUIRE(r.code == 0);
  CHECK(r.out ==
        "architecture,embedding,dev_weighted_f1,test_weighted_f1\n"
        "bilstm,subword,0.5800,0.6200\n"
        "dense,subword,0.6100,0.5900\n"
        "dense,char,0.7000,-\n");

  testutil::TempDir empty;
  CHECK(run_cli({"compare", empty.path().string()}).code == 1);
}

}
