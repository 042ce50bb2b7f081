#include "hsd/optim.hpp"

#include <algorithm>
#include <cmath>

#include "hsd/errors.hpp"

namespace hsd::train {

void OptimizerConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw ConfigError("adam betas must lie in (0,1)");
  if (eps <= 0.0) throw ConfigError("adam epsilon must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

void adamw_step(Tensor& theta, const Tensor& grad, AdamState& state, const OptimizerConfig& cfg) {
  if (!grad.same_shape(theta) || !state.m.same_shape(theta) || !state.v.same_shape(theta))
    throw ConfigError("adamw: parameter, gradient and state shapes differ");
  for (double g : grad.v) {
    if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in adamw step");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad.v[i];
    state.m.v[i] = cfg.beta1 * state.m.v[i] + (1.0 - cfg.beta1) * g;
    state.v.v[i] = cfg.beta2 * state.v.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m.v[i] / bc1;
    const double vhat = state.v.v[i] / bc2;
    theta.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) + cfg.lr * cfg.weight_decay * theta.v[i];
  }
}

AdamW::AdamW(const OptimizerConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(Param& p, double lr) {
  auto it = states_.find(p.name);
  if (it == states_.end()) {
    AdamState st;
    st.m = p.w;
    st.m.fill(0.0);
    st.v = st.m;
    it = states_.emplace(p.name, std::move(st)).first;
  }
  OptimizerConfig cfg = cfg_;
  cfg.lr = lr;
  adamw_step(p.w, p.g, it->second, cfg);
}

void StlrConfig::validate() const {
  if (total_steps == 0) throw ConfigError("stlr needs a positive total step count");
  if (cut_frac <= 0.0 || cut_frac >= 1.0) throw ConfigError("stlr cut_frac must be in (0,1)");
  if (ratio <= 1.0) throw ConfigError("stlr ratio must exceed 1");
  if (lr_floor >= lr_max) throw ConfigError("stlr floor must be below the peak");
}

double stlr(std::uint64_t step, const StlrConfig& cfg) {
  cfg.validate();
  const std::uint64_t cut =
      static_cast<std::uint64_t>(static_cast<double>(cfg.total_steps) * cfg.cut_frac);
  double p;
  if (cut == 0) {
    p = 1.0 - static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  } else if (step < cut) {
    p = static_cast<double>(step) / static_cast<double>(cut);
  } else {
    p = 1.0 - static_cast<double>(step - cut) / static_cast<double>(cfg.total_steps - cut);
  }
  const double lr = cfg.lr_max * (1.0 + p * (cfg.ratio - 1.0)) / cfg.ratio;
  return std::max(cfg.lr_floor, lr);
}

std::vector<double> discriminative_lrs(double base_lr, double decay_factor, std::size_t groups) {
  if (decay_factor <= 1.0) throw ConfigError("discriminative decay factor must exceed 1");
  std::vector<double> out(groups);
  double lr = base_lr;
  for (std::size_t i = 0; i < groups; ++i) {
    out[i] = lr;
    lr /= decay_factor;
  }
  return out;
}

std::size_t UnfreezePlan::stage(std::size_t epoch) const {
  const std::size_t per = std::max<std::size_t>(1, epochs_per_stage);
  return epoch / per;
}

std::size_t UnfreezePlan::trainable_groups(std::size_t epoch) const {
  return std::min(groups.size(), stage(epoch) + 1);
}

bool UnfreezePlan::trainable(const std::string& group, std::size_t epoch) const {
  const std::size_t k = trainable_groups(epoch);
  for (std::size_t i = 0; i < k; ++i)
    if (groups[i] == group) return true;
  return false;
}

}  // namespace hsd::train
