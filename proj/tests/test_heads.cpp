#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hsd/errors.hpp"
#include "hsd/heads.hpp"
#include "hsd/nn.hpp"
#include "hsd/rng.hpp"

using namespace hsd;
using namespace hsd::heads;

namespace {

Param* find_param(const std::vector<Param*>& params, const std::string& name) {
  for (Param* p : params)
    if (p->name == name) return p;
  REQUIRE_MESSAGE(false, "missing param " << name);
  return nullptr;
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace

TEST_SUITE("heads") {

TEST_CASE("dense head config validation") {
  DenseHeadConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 4;
  CHECK_NOTHROW(cfg.validate());

  DenseHeadConfig bad = cfg;
  bad.input_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.hidden_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dropout = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("dense head exposes the documented parameters") {
  DenseHeadConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dim = 5;
  cfg.classes = 3;
  Rng rng(1);
  DenseHead head(cfg, rng);
  auto params = head.params();
  REQUIRE(params.size() == 4);
  CHECK(find_param(params, "head.w1")->w.shape == std::vector<std::size_t>{3, 5});
  CHECK(find_param(params, "head.b1")->w.shape == std::vector<std::size_t>{5});
  CHECK(find_param(params, "head.w2")->w.shape == std::vector<std::size_t>{5, 3});
  CHECK(find_param(params, "head.b2")->w.shape == std::vector<std::size_t>{3});
  for (Param* p : params) CHECK(p->group == "head");
}

TEST_CASE("dense head with zero weights passes the output bias through") {
  DenseHeadConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 3;
  cfg.classes = 3;
  cfg.dropout = 0.0;
  Rng rng(7);
  DenseHead head(cfg, rng);
  auto params = head.params();
  for (Param* p : params) p->w.fill(0.0);
  Param* b2 = find_param(params, "head.b2");
  b2->w.v = {0.1, 0.2, 0.3};

  std::vector<double> x = {1.0, -2.0, 3.0, 4.0};
  auto logits = head.forward(x, Mode::Eval, nullptr, nullptr);
  REQUIRE(logits.size() == 3);
  CHECK(logits[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(logits[2] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("dense head matches a hand-computed forward chain") {
  DenseHeadConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = 2;
  cfg.classes = 2;
  cfg.dropout = 0.0;
  Rng rng(3);
  DenseHead head(cfg, rng);
  auto params = head.params();
  find_param(params, "head.w1")->w.v = {1.0, 2.0, -3.0, -4.0};
  find_param(params, "head.b1")->w.v = {0.5, -0.5};
  find_param(params, "head.w2")->w.v = {1.0, 0.0, 0.0, 1.0};
  find_param(params, "head.b2")->w.v = {0.1, -0.1};

  // x=(1,-1): pre = (1*1 + -1*-3, 1*2 + -1*-4) = (4,6); +b1 -> (4.5,5.5);
  // relu keeps both; identity w2 + b2 -> (4.6, 5.4).
  auto logits = head.forward({1.0, -1.0}, Mode::Eval, nullptr, nullptr);
  CHECK(logits[0] == doctest::Approx(4.6).epsilon(1e-14));
  CHECK(logits[1] == doctest::Approx(5.4).epsilon(1e-14));
}

TEST_CASE("dense head relu clips negative preactivations") {
  DenseHeadConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden_dim = 2;
  cfg.classes = 2;
  cfg.dropout = 0.0;
  Rng rng(3);
  DenseHead head(cfg, rng);
  auto params = head.params();
  find_param(params, "head.w1")->w.v = {1.0, -1.0};
  find_param(params, "head.b1")->w.v = {0.0, 0.0};
  find_param(params, "head.w2")->w.v = {1.0, 0.0, 0.0, 1.0};
  find_param(params, "head.b2")->w.v = {0.0, 0.0};

  auto logits = head.forward({2.0}, Mode::Eval, nullptr, nullptr);
  CHECK(logits[0] == doctest::Approx(2.0));
  CHECK(logits[1] == doctest::Approx(0.0));
}

TEST_CASE("dense head eval forward is deterministic and input dim is checked") {
  DenseHeadConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 4;
  Rng rng(11);
  DenseHead head(cfg, rng);
  std::vector<double> x(6);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.3 * static_cast<double>(i) - 0.7;
  auto a = head.forward(x, Mode::Eval, nullptr, nullptr);
  auto b = head.forward(x, Mode::Eval, nullptr, nullptr);
  CHECK(a == b);
  CHECK_THROWS_AS(head.forward({1.0, 2.0}, Mode::Eval, nullptr, nullptr), ConfigError);
}

TEST_CASE("train-mode dropout is inverted: kept units scaled, mean preserved") {
  std::vector<double> x(4000, 1.0);
  Rng rng(99);
  std::vector<double> mask;
  apply_dropout(x.data(), x.size(), 0.4, Mode::Train, &rng, &mask);
  const double keep_scale = 1.0 / 0.6;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool is_kept = x[i] != 0.0;
    if (is_kept) {
      CHECK(x[i] == doctest::Approx(keep_scale).epsilon(1e-12));
      ++kept;
    }
    CHECK(mask[i] == x[i]);
  }
  // Mean of inverted dropout is 1; sigma of the sample mean is
  // sqrt(p/(1-p)/n) = sqrt(0.4/0.6/4000) ~ 0.0129; allow 4 sigma.
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  CHECK(std::abs(mean - 1.0) < 0.052);
  CHECK(kept > 2000);
  CHECK(kept < 2800);
}

TEST_CASE("eval mode and zero rate leave activations untouched") {
  std::vector<double> x = {1.0, -2.0, 3.5};
  std::vector<double> orig = x;
  std::vector<double> mask;
  apply_dropout(x.data(), x.size(), 0.5, Mode::Eval, nullptr, &mask);
  CHECK(x == orig);
  CHECK(mask == std::vector<double>(3, 1.0));
  Rng rng(1);
  apply_dropout(x.data(), x.size(), 0.0, Mode::Train, &rng, &mask);
  CHECK(x == orig);
}

TEST_CASE("train-mode dense forward is reproducible under the same rng seed") {
  DenseHeadConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden_dim = 8;
  cfg.dropout = 0.5;
  Rng init(21);
  DenseHead head(cfg, init);
  std::vector<double> x = {0.1, -0.2, 0.3, -0.4, 0.5};
  Rng r1(42), r2(42);
  auto a = head.forward(x, Mode::Train, &r1, nullptr);
  auto b = head.forward(x, Mode::Train, &r2, nullptr);
  CHECK(a == b);
}

TEST_CASE("bilstm head config validation") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 4;
  cfg.units = 4;
  CHECK_NOTHROW(cfg.validate());
  BiLstmHeadConfig bad = cfg;
  bad.units = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.dropout = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bilstm head parameter inventory") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 3;
  cfg.units = 2;
  cfg.classes = 3;
  Rng rng(5);
  BiLstmHead head(cfg, rng);
  auto params = head.params();
  REQUIRE(params.size() == 26);
  const char* gates[] = {"wi", "ui", "bi", "wf", "uf", "bf",
                         "wg", "ug", "bg", "wo", "uo", "bo"};
  for (const char* g : gates) {
    CHECK(find_param(params, std::string("head.fwd.") + g) != nullptr);
    CHECK(find_param(params, std::string("head.bwd.") + g) != nullptr);
  }
  CHECK(find_param(params, "head.proj.w")->w.shape == std::vector<std::size_t>{4, 3});
  CHECK(find_param(params, "head.proj.b")->w.shape == std::vector<std::size_t>{3});
  for (Param* p : params) CHECK(p->group == "head");
  // Forget-gate bias starts at +1 in both directions.
  for (double v : find_param(params, "head.fwd.bf")->w.v) CHECK(v == 1.0);
  for (double v : find_param(params, "head.bwd.bf")->w.v) CHECK(v == 1.0);
}

TEST_CASE("bilstm head with zero weights emits the projection bias") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 3;
  cfg.units = 4;
  cfg.classes = 3;
  cfg.dropout = 0.0;
  Rng rng(9);
  BiLstmHead head(cfg, rng);
  auto params = head.params();
  for (Param* p : params) p->w.fill(0.0);
  find_param(params, "head.proj.b")->w.v = {0.3, -0.2, 0.6};

  Tensor h({4, 3});
  for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] = 0.5 * static_cast<double>(i);
  BiLstmHeadCache cache;
  auto logits = head.forward(h, 4, Mode::Eval, nullptr, &cache);
  REQUIRE(logits.size() == 3);
  CHECK(logits[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(logits[2] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(cache.rep.size() == 2 * cfg.units);
}

TEST_CASE("bilstm head validates inputs") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 3;
  cfg.units = 2;
  Rng rng(4);
  BiLstmHead head(cfg, rng);
  Tensor h({2, 3});
  CHECK_THROWS_AS(head.forward(h, 0, Mode::Eval, nullptr, nullptr), ConfigError);
  CHECK_THROWS_AS(head.forward(h, 5, Mode::Eval, nullptr, nullptr), ConfigError);
  Tensor wrong({2, 4});
  CHECK_THROWS_AS(head.forward(wrong, 2, Mode::Eval, nullptr, nullptr), ConfigError);
}

TEST_CASE("single lstm step matches the gate equations") {
  Rng rng(13);
  LstmCell cell("cell.", "head", 1, 1, rng);
  auto params = cell.params();
  auto set = [&](const std::string& leaf, double v) {
    find_param(params, "cell." + leaf)->w.v = {v};
  };
  set("wi", 0.5);
  set("ui", 0.25);
  set("bi", 0.1);
  set("wf", -0.3);
  set("uf", 0.5);
  set("bf", 0.2);
  set("wg", 1.0);
  set("ug", -1.0);
  set("bg", 0.05);
  set("wo", 0.4);
  set("uo", 0.1);
  set("bo", -0.02);

  const double x = 1.0;
  std::vector<double> h_prev = {0.2}, c_prev = {0.3};
  std::vector<double> h, c;
  cell.step(&x, h_prev, c_prev, &h, &c, nullptr);

  const double i = sigmoid(0.5 * 1.0 + 0.25 * 0.2 + 0.1);
  const double f = sigmoid(-0.3 * 1.0 + 0.5 * 0.2 + 0.2);
  const double g = std::tanh(1.0 * 1.0 + -1.0 * 0.2 + 0.05);
  const double o = sigmoid(0.4 * 1.0 + 0.1 * 0.2 + -0.02);
  const double c_want = f * 0.3 + i * g;
  CHECK(f == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c[0] == doctest::Approx(c_want).epsilon(1e-14));
  CHECK(h[0] == doctest::Approx(o * std::tanh(c_want)).epsilon(1e-14));
}

TEST_CASE("bilstm directions are symmetric under sequence reversal") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 3;
  cfg.units = 4;
  cfg.classes = 3;
  cfg.dropout = 0.0;
  Rng rng(31);
  BiLstmHead head(cfg, rng);
  auto params = head.params();
  const char* gates[] = {"wi", "ui", "bi", "wf", "uf", "bf",
                         "wg", "ug", "bg", "wo", "uo", "bo"};
  for (const char* g : gates) {
    find_param(params, std::string("head.bwd.") + g)->w =
        find_param(params, std::string("head.fwd.") + g)->w;
  }

  const std::size_t n = 5;
  Tensor h({n, 3});
  Rng data(77);
  for (double& v : h.v) v = data.uniform(-1.0, 1.0);
  Tensor rev({n, 3});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < 3; ++j) rev.v[t * 3 + j] = h.v[(n - 1 - t) * 3 + j];

  BiLstmHeadCache fwd_cache, rev_cache;
  head.forward(h, n, Mode::Eval, nullptr, &fwd_cache);
  head.forward(rev, n, Mode::Eval, nullptr, &rev_cache);

  const std::size_t u = cfg.units;
  for (std::size_t j = 0; j < u; ++j) {
    CHECK(fwd_cache.rep[j] == doctest::Approx(rev_cache.rep[u + j]).epsilon(1e-12));
    CHECK(fwd_cache.rep[u + j] == doctest::Approx(rev_cache.rep[j]).epsilon(1e-12));
  }
}

TEST_CASE("softmax cross entropy oracles") {
  SUBCASE("uniform logits give ln(classes)") {
    auto [loss, probs] = softmax_cross_entropy({0.0, 0.0, 0.0}, 1);
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("extreme logits do not overflow") {
    auto [loss, probs] = softmax_cross_entropy({1000.0, 0.0, 0.0}, 0);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-12);
    CHECK(probs[0] == doctest::Approx(1.0).epsilon(1e-12));
    auto [big_loss, big_probs] = softmax_cross_entropy({1000.0, 0.0, 0.0}, 1);
    CHECK(std::isfinite(big_loss));
    CHECK(big_loss == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(std::isfinite(big_probs[1]));
  }
  SUBCASE("hand value for (1,2,3) gold 2") {
    auto [loss, probs] = softmax_cross_entropy({1.0, 2.0, 3.0}, 2);
    CHECK(loss == doctest::Approx(0.40760596444438104).epsilon(1e-13));
    CHECK(probs[2] == doctest::Approx(std::exp(-loss)).epsilon(1e-13));
  }
  SUBCASE("loss equals -log prob of gold") {
    auto [loss, probs] = softmax_cross_entropy({0.3, -1.2, 0.8}, 1);
    CHECK(loss == doctest::Approx(-std::log(probs[1])).epsilon(1e-12));
  }
  SUBCASE("probabilities sum to one") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> logits(4);
      for (double& v : logits) v = rng.uniform(-8.0, 8.0);
      auto [loss, probs] = softmax_cross_entropy(logits, 0);
      double sum = 0.0;
      for (double p : probs) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-9);
      CHECK(loss >= 0.0);
    }
  }
  SUBCASE("shift invariance") {
    std::vector<double> logits = {0.5, -2.0, 1.5};
    std::vector<double> shifted = {100.5, 98.0, 101.5};
    auto a = softmax(logits);
    auto b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(softmax_cross_entropy(logits, 2).first ==
          doctest::Approx(softmax_cross_entropy(shifted, 2).first).epsilon(1e-12));
  }
  SUBCASE("gold index out of range throws") {
    CHECK_THROWS_AS(softmax_cross_entropy({0.0, 0.0}, 2), std::out_of_range);
  }
}

TEST_CASE("cross entropy gradient is probs minus one-hot") {
  auto [loss, probs] = softmax_cross_entropy({0.4, -0.3, 1.1}, 1);
  (void)loss;
  auto grad = cross_entropy_grad(probs, 1);
  CHECK(grad[0] == doctest::Approx(probs[0]).epsilon(1e-15));
  CHECK(grad[1] == doctest::Approx(probs[1] - 1.0).epsilon(1e-15));
  CHECK(grad[2] == doctest::Approx(probs[2]).epsilon(1e-15));
  double sum = 0.0;
  for (double g : grad) sum += g;
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("gradient_check accepts an exact quadratic") {
  Param p("p", "g", {1});
  p.w.v[0] = 3.0;
  p.g.v[0] = 6.0;
  Rng rng(1);
  auto loss = [&]() { return p.w.v[0] * p.w.v[0]; };
  CHECK(heads::gradient_check(loss, {&p}, 1e-4, 16, rng) < 1e-9);
}

TEST_CASE("gradient_check flags a wrong gradient") {
  Param p("p", "g", {1});
  p.w.v[0] = 3.0;
  p.g.v[0] = 5.0;
  Rng rng(1);
  auto loss = [&]() { return p.w.v[0] * p.w.v[0]; };
  CHECK(heads::gradient_check(loss, {&p}, 1e-4, 16, rng) > 0.1);
}

TEST_CASE("dense head backward matches finite differences") {
  DenseHeadConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_dim = 6;
  cfg.classes = 3;
  cfg.dropout = 0.0;
  Rng rng(101);
  DenseHead head(cfg, rng);

  Param input("input", "", {8});
  Rng data(5);
  for (double& v : input.w.v) v = data.uniform(-1.0, 1.0);
  const std::size_t gold = 2;

  auto params = head.params();
  auto all = params;
  all.push_back(&input);
  zero_grads(all);

  DenseHeadCache cache;
  auto logits = head.forward(input.w.v, Mode::Eval, nullptr, &cache);
  auto [loss0, probs] = softmax_cross_entropy(logits, gold);
  (void)loss0;
  auto dlogits = cross_entropy_grad(probs, gold);
  std::vector<double> dinput(8, 0.0);
  head.backward(cache, dlogits, &dinput);
  std::copy(dinput.begin(), dinput.end(), input.g.v.begin());

  auto loss = [&]() {
    auto l = head.forward(input.w.v, Mode::Eval, nullptr, nullptr);
    return softmax_cross_entropy(l, gold).first;
  };
  Rng pick(7);
  CHECK(heads::gradient_check(loss, all, 1e-5, 64, pick) < 1e-6);
}

TEST_CASE("bilstm head backward matches finite differences") {
  BiLstmHeadConfig cfg;
  cfg.input_dim = 5;
  cfg.units = 4;
  cfg.classes = 3;
  cfg.dropout = 0.0;
  Rng rng(202);
  BiLstmHead head(cfg, rng);

  const std::size_t n = 3;
  Param input("input", "", {n, 5});
  Rng data(6);
  for (double& v : input.w.v) v = data.uniform(-1.0, 1.0);
  const std::size_t gold = 1;

  auto params = head.params();
  auto all = params;
  all.push_back(&input);
  zero_grads(all);

  Tensor h({n, 5});
  h.v = input.w.v;
  BiLstmHeadCache cache;
  auto logits = head.forward(h, n, Mode::Eval, nullptr, &cache);
  auto [loss0, probs] = softmax_cross_entropy(logits, gold);
  (void)loss0;
  auto dlogits = cross_entropy_grad(probs, gold);
  Tensor dh({n, 5});
  head.backward(cache, dlogits, &dh);
  input.g.v = dh.v;

  auto loss = [&]() {
    Tensor cur({n, 5});
    cur.v = input.w.v;
    auto l = head.forward(cur, n, Mode::Eval, nullptr, nullptr);
    return softmax_cross_entropy(l, gold).first;
  };
  Rng pick(8);
  CHECK(heads::gradient_check(loss, all, 1e-5, 24, pick) < 1e-5);
}

}
