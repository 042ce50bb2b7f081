#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hsd/tensor.hpp"

namespace hsd::train {

struct OptimizerConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

struct AdamState {
  Tensor m, v;
  std::uint64_t t = 0;
};

// One decoupled-weight-decay Adam update, in place. `state` is created lazily
// by the caller with zero m/v matching theta's shape.
void adamw_step(Tensor& theta, const Tensor& grad, AdamState& state, const OptimizerConfig& cfg);

// Keeps per-parameter state keyed by parameter name.
class AdamW {
 public:
  explicit AdamW(const OptimizerConfig& cfg);

  const OptimizerConfig& config() const { return cfg_; }

  // Applies one update with the given learning rate (schedule and
  // per-group discrimination already folded in).
  void step(Param& p, double lr);

 private:
  OptimizerConfig cfg_;
  std::map<std::string, AdamState> states_;
};

struct StlrConfig {
  std::uint64_t total_steps = 0;
  double cut_frac = 0.1;
  double ratio = 32.0;
  double lr_max = 1e-2;
  double lr_floor = 1e-8;

  void validate() const;
};

// Slanted triangular learning rate at step t (0-based, t <= total_steps).
double stlr(std::uint64_t step, const StlrConfig& cfg);

// Per-group learning rates, classifier first: [base, base/f, base/f^2, ...].
std::vector<double> discriminative_lrs(double base_lr, double decay_factor, std::size_t groups);

// Gradual unfreezing: stage k trains the first k+1 groups (classifier-first
// order). The trainable set grows by one group every epochs_per_stage epochs.
struct UnfreezePlan {
  std::vector<std::string> groups;
  std::size_t epochs_per_stage = 1;

  std::size_t stage(std::size_t epoch) const;
  std::size_t trainable_groups(std::size_t epoch) const;
  bool trainable(const std::string& group, std::size_t epoch) const;
};

}  // namespace hsd::train
