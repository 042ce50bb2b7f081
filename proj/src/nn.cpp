#include "hsd/nn.hpp"

#include <cmath>

namespace hsd {

void linear_forward(const Tensor& w, const double* x, double* y) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t j = 0; j < out; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wr = &w.v[i * out];
    for (std::size_t j = 0; j < out; ++j) y[j] += wr[j] * xi;
  }
}

void linear_backward(const Tensor& w, Tensor& dw, Tensor& db, const double* x, const double* dy,
                     double* dx) {
  const std::size_t in = w.shape[0], out = w.shape[1];
  for (std::size_t j = 0; j < out; ++j) db.v[j] += dy[j];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wr = &w.v[i * out];
    double* dwr = &dw.v[i * out];
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) {
      dwr[j] += xi * dy[j];
      acc += wr[j] * dy[j];
    }
    if (dx) dx[i] += acc;
  }
}

void apply_dropout(double* x, std::size_t n, double rate, Mode mode, Rng* rng,
                   std::vector<double>* mask) {
  if (mask) mask->assign(n, 1.0);
  if (mode == Mode::Eval || rate <= 0.0) return;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = rng->bernoulli(rate) ? 0.0 : scale;
    x[i] *= m;
    if (mask) (*mask)[i] = m;
  }
}

void apply_dropout_mask(double* x, const std::vector<double>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) x[i] *= mask[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LstmCell::LstmCell(const std::string& prefix, const std::string& group, std::size_t input_dim,
                   std::size_t units, Rng& rng)
    : input_dim_(input_dim), units_(units) {
  auto make = [&](Param& p, const std::string& leaf, std::size_t rows, std::size_t cols,
                  std::size_t fan_in) {
    p.name = prefix + leaf;
    p.group = group;
    p.w = cols ? Tensor({rows, cols}) : Tensor({rows});
    p.g = p.w;
    p.g.fill(0.0);
    if (fan_in) init_uniform_fan_in(p.w, fan_in, rng);
  };
  make(wi_, "wi", input_dim, units, input_dim);
  make(ui_, "ui", units, units, units);
  make(bi_, "bi", units, 0, 0);
  make(wf_, "wf", input_dim, units, input_dim);
  make(uf_, "uf", units, units, units);
  make(bf_, "bf", units, 0, 0);
  make(wg_, "wg", input_dim, units, input_dim);
  make(ug_, "ug", units, units, units);
  make(bg_, "bg", units, 0, 0);
  make(wo_, "wo", input_dim, units, input_dim);
  make(uo_, "uo", units, units, units);
  make(bo_, "bo", units, 0, 0);
  bf_.w.fill(1.0);
}

void LstmCell::step(const double* x, const std::vector<double>& h_prev,
                    const std::vector<double>& c_prev, std::vector<double>* h,
                    std::vector<double>* c, LstmStepCache* cache) const {
  const std::size_t u = units_;
  std::vector<double> i(u), f(u), g(u), o(u);
  auto gate = [&](const Param& w, const Param& uu, const Param& b, std::vector<double>& out) {
    linear_forward(w.w, x, out.data());
    std::vector<double> rec(u);
    linear_forward(uu.w, h_prev.data(), rec.data());
    for (std::size_t j = 0; j < u; ++j) out[j] += rec[j] + b.w.v[j];
  };
  gate(wi_, ui_, bi_, i);
  gate(wf_, uf_, bf_, f);
  gate(wg_, ug_, bg_, g);
  gate(wo_, uo_, bo_, o);
  for (std::size_t j = 0; j < u; ++j) {
    i[j] = sigmoid(i[j]);
    f[j] = sigmoid(f[j]);
    g[j] = std::tanh(g[j]);
    o[j] = sigmoid(o[j]);
  }
  c->resize(u);
  h->resize(u);
  std::vector<double> tanh_c(u);
  for (std::size_t j = 0; j < u; ++j) {
    (*c)[j] = f[j] * c_prev[j] + i[j] * g[j];
    tanh_c[j] = std::tanh((*c)[j]);
    (*h)[j] = o[j] * tanh_c[j];
  }
  if (cache) {
    cache->x.assign(x, x + input_dim_);
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = *c;
    cache->tanh_c = std::move(tanh_c);
  }
}

void LstmCell::step_backward(const LstmStepCache& cache, const std::vector<double>& dh,
                             const std::vector<double>& dc_in, double* dx,
                             std::vector<double>* dh_prev, std::vector<double>* dc_prev) {
  const std::size_t u = units_;
  std::vector<double> dc(u), di(u), df(u), dg(u), dout(u);
  for (std::size_t j = 0; j < u; ++j) {
    const double th = cache.tanh_c[j];
    dout[j] = dh[j] * th * cache.o[j] * (1.0 - cache.o[j]);
    dc[j] = dc_in[j] + dh[j] * cache.o[j] * (1.0 - th * th);
    di[j] = dc[j] * cache.g[j] * cache.i[j] * (1.0 - cache.i[j]);
    df[j] = dc[j] * cache.c_prev[j] * cache.f[j] * (1.0 - cache.f[j]);
    dg[j] = dc[j] * cache.i[j] * (1.0 - cache.g[j] * cache.g[j]);
  }
  dc_prev->assign(u, 0.0);
  for (std::size_t j = 0; j < u; ++j) (*dc_prev)[j] = dc[j] * cache.f[j];

  for (std::size_t j = 0; j < input_dim_; ++j) dx[j] = 0.0;
  dh_prev->assign(u, 0.0);
  auto gate_back = [&](Param& w, Param& uu, Param& b, const std::vector<double>& dpre) {
    linear_backward(w.w, w.g, b.g, cache.x.data(), dpre.data(), dx);
    Tensor unused_bias({units_});
    linear_backward(uu.w, uu.g, unused_bias, cache.h_prev.data(), dpre.data(), dh_prev->data());
  };
  gate_back(wi_, ui_, bi_, di);
  gate_back(wf_, uf_, bf_, df);
  gate_back(wg_, ug_, bg_, dg);
  gate_back(wo_, uo_, bo_, dout);
}

std::vector<Param*> LstmCell::params() {
  return {&wi_, &ui_, &bi_, &wf_, &uf_, &bf_, &wg_, &ug_, &bg_, &wo_, &uo_, &bo_};
}

std::vector<const Param*> LstmCell::params() const {
  return {&wi_, &ui_, &bi_, &wf_, &uf_, &bf_, &wg_, &ug_, &bg_, &wo_, &uo_, &bo_};
}

}  // namespace hsd
