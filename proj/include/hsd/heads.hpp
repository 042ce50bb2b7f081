#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/tensor.hpp"

namespace hsd::heads {

using hsd::Mode;

struct DenseHeadConfig {
  std::size_t input_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t classes = 3;
  double dropout = 0.4;

  void validate() const;
};

struct DenseHeadCache {
  std::vector<double> input;
  std::vector<double> pre;     // hidden pre-activation
  std::vector<double> hidden;  // after ReLU and dropout
  std::vector<double> drop;
};

// Two dense layers: logits = W2^T drop(relu(W1^T x + b1)) + b2.
class DenseHead {
 public:
  DenseHead() = default;
  DenseHead(const DenseHeadConfig& cfg, Rng& rng);

  const DenseHeadConfig& config() const { return cfg_; }

  std::vector<double> forward(const std::vector<double>& pooled, Mode mode, Rng* rng,
                              DenseHeadCache* cache) const;
  // Accumulates parameter grads; adds input gradient into dinput if given.
  void backward(const DenseHeadCache& cache, const std::vector<double>& dlogits,
                std::vector<double>* dinput);

  std::vector<Param*> params();

 private:
  DenseHeadConfig cfg_;
  Param w1_, b1_, w2_, b2_;
};

struct BiLstmHeadConfig {
  std::size_t input_dim = 128;
  std::size_t units = 256;
  std::size_t classes = 3;
  double dropout = 0.4;

  void validate() const;
};

struct BiLstmHeadCache {
  std::size_t n = 0;
  std::vector<LstmStepCache> fwd, bwd;
  std::vector<double> rep;       // concat of final hiddens, 2u
  std::vector<double> act;       // after ReLU and dropout
  std::vector<double> drop;
};

// Forward and backward LSTM over the real rows of H; representation is the
// concatenation of each direction's final hidden state.
class BiLstmHead {
 public:
  BiLstmHead() = default;
  BiLstmHead(const BiLstmHeadConfig& cfg, Rng& rng);

  const BiLstmHeadConfig& config() const { return cfg_; }

  // h holds the sequence row-major; rows [0, n) are real.
  std::vector<double> forward(const Tensor& h, std::size_t n, Mode mode, Rng* rng,
                              BiLstmHeadCache* cache) const;
  // dh, if given, must be n x input_dim and receives the sequence gradient.
  void backward(const BiLstmHeadCache& cache, const std::vector<double>& dlogits, Tensor* dh);

  std::vector<Param*> params();

 private:
  BiLstmHeadConfig cfg_;
  LstmCell fwd_, bwd_;
  Param proj_w_, proj_b_;
};

std::vector<double> softmax(const std::vector<double>& logits);

// Returns (loss, probabilities). Stable under large logits.
std::pair<double, std::vector<double>> softmax_cross_entropy(const std::vector<double>& logits,
                                                             std::size_t gold);

// d(loss)/d(logits) = probs - onehot(gold).
std::vector<double> cross_entropy_grad(const std::vector<double>& probs, std::size_t gold);

// Central-difference check. `loss` evaluates the loss at the current
// parameters; analytic grads must already be accumulated in each Param.g.
// Samples up to max_coords coordinates per tensor. Returns the max relative
// error |analytic - numeric| / max(1, |analytic|, |numeric|).
double gradient_check(const std::function<double()>& loss, const std::vector<Param*>& params,
                      double eps, std::size_t max_coords, Rng& rng);

}  // namespace hsd::heads
