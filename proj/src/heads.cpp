#include "hsd/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hsd/errors.hpp"

namespace hsd::heads {

void DenseHeadConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || classes < 2)
    throw ConfigError("dense head dims must be positive with at least two classes");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
}

DenseHead::DenseHead(const DenseHeadConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  auto make = [&](Param& p, const std::string& name, std::vector<std::size_t> shape,
                  std::size_t fan_in) {
    p.name = name;
    p.group = "head";
    p.w = Tensor(std::move(shape));
    p.g = p.w;
    if (fan_in) init_uniform_fan_in(p.w, fan_in, rng);
  };
  make(w1_, "head.w1", {cfg_.input_dim, cfg_.hidden_dim}, cfg_.input_dim);
  make(b1_, "head.b1", {cfg_.hidden_dim}, 0);
  make(w2_, "head.w2", {cfg_.hidden_dim, cfg_.classes}, cfg_.hidden_dim);
  make(b2_, "head.b2", {cfg_.classes}, 0);
}

std::vector<double> DenseHead::forward(const std::vector<double>& pooled, Mode mode, Rng* rng,
                                       DenseHeadCache* cache) const {
  if (pooled.size() != cfg_.input_dim)
    throw ConfigError("dense head input dim mismatch");
  std::vector<double> pre(cfg_.hidden_dim);
  linear_forward(w1_.w, pooled.data(), pre.data());
  for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) pre[j] += b1_.w.v[j];
  std::vector<double> hidden(cfg_.hidden_dim);
  for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) hidden[j] = std::max(0.0, pre[j]);
  std::vector<double> drop;
  apply_dropout(hidden.data(), hidden.size(), cfg_.dropout, mode, rng, &drop);
  std::vector<double> logits(cfg_.classes);
  linear_forward(w2_.w, hidden.data(), logits.data());
  for (std::size_t j = 0; j < cfg_.classes; ++j) logits[j] += b2_.w.v[j];
  if (cache) {
    cache->input = pooled;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->drop = std::move(drop);
  }
  return logits;
}

void DenseHead::backward(const DenseHeadCache& cache, const std::vector<double>& dlogits,
                         std::vector<double>* dinput) {
  std::vector<double> dhidden(cfg_.hidden_dim, 0.0);
  linear_backward(w2_.w, w2_.g, b2_.g, cache.hidden.data(), dlogits.data(), dhidden.data());
  apply_dropout_mask(dhidden.data(), cache.drop);
  for (std::size_t j = 0; j < cfg_.hidden_dim; ++j)
    if (cache.pre[j] <= 0.0) dhidden[j] = 0.0;
  linear_backward(w1_.w, w1_.g, b1_.g, cache.input.data(), dhidden.data(),
                  dinput ? dinput->data() : nullptr);
}

std::vector<Param*> DenseHead::params() { return {&w1_, &b1_, &w2_, &b2_}; }

void BiLstmHeadConfig::validate() const {
  if (input_dim == 0 || units == 0 || classes < 2)
    throw ConfigError("bilstm head dims must be positive with at least two classes");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
}

BiLstmHead::BiLstmHead(const BiLstmHeadConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  fwd_ = LstmCell("head.fwd.", "head", cfg_.input_dim, cfg_.units, rng);
  bwd_ = LstmCell("head.bwd.", "head", cfg_.input_dim, cfg_.units, rng);
  proj_w_.name = "head.proj.w";
  proj_w_.group = "head";
  proj_w_.w = Tensor({2 * cfg_.units, cfg_.classes});
  proj_w_.g = proj_w_.w;
  init_uniform_fan_in(proj_w_.w, 2 * cfg_.units, rng);
  proj_b_.name = "head.proj.b";
  proj_b_.group = "head";
  proj_b_.w = Tensor({cfg_.classes});
  proj_b_.g = proj_b_.w;
}

std::vector<double> BiLstmHead::forward(const Tensor& h, std::size_t n, Mode mode, Rng* rng,
                                        BiLstmHeadCache* cache) const {
  if (n == 0) throw ConfigError("bilstm head needs at least one unmasked position");
  if (h.shape.size() != 2 || h.shape[1] != cfg_.input_dim || h.shape[0] < n)
    throw ConfigError("bilstm head input shape mismatch");
  const std::size_t u = cfg_.units;

  std::vector<LstmStepCache> fc(cache ? n : 0), bc(cache ? n : 0);
  std::vector<double> hf(u, 0.0), cf(u, 0.0), hb(u, 0.0), cb(u, 0.0);
  std::vector<double> hn, cn;
  for (std::size_t t = 0; t < n; ++t) {
    fwd_.step(&h.v[t * cfg_.input_dim], hf, cf, &hn, &cn, cache ? &fc[t] : nullptr);
    hf = hn;
    cf = cn;
  }
  for (std::size_t t = n; t-- > 0;) {
    bwd_.step(&h.v[t * cfg_.input_dim], hb, cb, &hn, &cn, cache ? &bc[n - 1 - t] : nullptr);
    hb = hn;
    cb = cn;
  }

  std::vector<double> rep(2 * u);
  std::copy(hf.begin(), hf.end(), rep.begin());
  std::copy(hb.begin(), hb.end(), rep.begin() + static_cast<long>(u));
  std::vector<double> act(2 * u);
  for (std::size_t j = 0; j < 2 * u; ++j) act[j] = std::max(0.0, rep[j]);
  std::vector<double> drop;
  apply_dropout(act.data(), act.size(), cfg_.dropout, mode, rng, &drop);

  std::vector<double> logits(cfg_.classes);
  linear_forward(proj_w_.w, act.data(), logits.data());
  for (std::size_t j = 0; j < cfg_.classes; ++j) logits[j] += proj_b_.w.v[j];
  if (cache) {
    cache->n = n;
    cache->fwd = std::move(fc);
    cache->bwd = std::move(bc);
    cache->rep = std::move(rep);
    cache->act = std::move(act);
    cache->drop = std::move(drop);
  }
  return logits;
}

void BiLstmHead::backward(const BiLstmHeadCache& cache, const std::vector<double>& dlogits,
                          Tensor* dh) {
  const std::size_t u = cfg_.units;
  const std::size_t n = cache.n;
  std::vector<double> dact(2 * u, 0.0);
  linear_backward(proj_w_.w, proj_w_.g, proj_b_.g, cache.act.data(), dlogits.data(), dact.data());
  apply_dropout_mask(dact.data(), cache.drop);
  for (std::size_t j = 0; j < 2 * u; ++j)
    if (cache.rep[j] <= 0.0) dact[j] = 0.0;

  std::vector<double> dhf(dact.begin(), dact.begin() + static_cast<long>(u));
  std::vector<double> dhb(dact.begin() + static_cast<long>(u), dact.end());
  std::vector<double> dcf(u, 0.0), dcb(u, 0.0);
  std::vector<double> dx(cfg_.input_dim), dh_prev, dc_prev;
  for (std::size_t t = n; t-- > 0;) {
    fwd_.step_backward(cache.fwd[t], dhf, dcf, dx.data(), &dh_prev, &dc_prev);
    if (dh)
      for (std::size_t j = 0; j < cfg_.input_dim; ++j) dh->v[t * cfg_.input_dim + j] += dx[j];
    dhf = dh_prev;
    dcf = dc_prev;
  }
  for (std::size_t s = n; s-- > 0;) {
    // backward-direction step s consumed row n-1-s
    bwd_.step_backward(cache.bwd[s], dhb, dcb, dx.data(), &dh_prev, &dc_prev);
    if (dh) {
      const std::size_t t = n - 1 - s;
      for (std::size_t j = 0; j < cfg_.input_dim; ++j) dh->v[t * cfg_.input_dim + j] += dx[j];
    }
    dhb = dh_prev;
    dcb = dc_prev;
  }
}

std::vector<Param*> BiLstmHead::params() {
  std::vector<Param*> out = fwd_.params();
  for (Param* p : bwd_.params()) out.push_back(p);
  out.push_back(&proj_w_);
  out.push_back(&proj_b_);
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

std::pair<double, std::vector<double>> softmax_cross_entropy(const std::vector<double>& logits,
                                                             std::size_t gold) {
  if (gold >= logits.size()) throw std::out_of_range("gold class index out of range");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - mx);
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = std::exp(logits[i] - mx) / sum;
  const double loss = std::log(sum) - (logits[gold] - mx);
  return {loss, probs};
}

std::vector<double> cross_entropy_grad(const std::vector<double>& probs, std::size_t gold) {
  std::vector<double> d = probs;
  d[gold] -= 1.0;
  return d;
}

double gradient_check(const std::function<double()>& loss, const std::vector<Param*>& params,
                      double eps, std::size_t max_coords, Rng& rng) {
  double worst = 0.0;
  for (Param* p : params) {
    const std::size_t size = p->w.size();
    std::vector<std::size_t> coords;
    if (size <= max_coords) {
      coords.resize(size);
      for (std::size_t i = 0; i < size; ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords; ++i)
        coords.push_back(static_cast<std::size_t>(rng.below(size)));
    }
    for (std::size_t idx : coords) {
      const double saved = p->w.v[idx];
      p->w.v[idx] = saved + eps;
      const double up = loss();
      p->w.v[idx] = saved - eps;
      const double down = loss();
      p->w.v[idx] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->g.v[idx];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace hsd::heads
