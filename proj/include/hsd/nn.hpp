#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsd/rng.hpp"
#include "hsd/tensor.hpp"

namespace hsd {

enum class Mode { Train, Eval };

// y[j] = sum_i w[i][j] * x[i]  (w: in x out), y overwritten.
void linear_forward(const Tensor& w, const double* x, double* y);
// dw[i][j] += x[i] * dy[j]; db[j] += dy[j]; dx[i] += sum_j w[i][j] * dy[j].
void linear_backward(const Tensor& w, Tensor& dw, Tensor& db, const double* x, const double* dy,
                     double* dx);

// Inverted dropout. In train mode each kept unit is scaled by 1/(1-rate) so
// the eval pass is the expectation; `mask` receives the applied scales.
void apply_dropout(double* x, std::size_t n, double rate, Mode mode, Rng* rng,
                   std::vector<double>* mask);
void apply_dropout_mask(double* x, const std::vector<double>& mask);

double sigmoid(double x);

struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, g, o, c, tanh_c;
};

// One LSTM direction: gate weights for input/forget/cell/output.
// Forget-gate bias starts at +1.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& prefix, const std::string& group, std::size_t input_dim,
           std::size_t units, Rng& rng);

  std::size_t units() const { return units_; }
  std::size_t input_dim() const { return input_dim_; }

  // h/c are resized to `units`; cache optional.
  void step(const double* x, const std::vector<double>& h_prev, const std::vector<double>& c_prev,
            std::vector<double>* h, std::vector<double>* c, LstmStepCache* cache) const;

  // Accumulates parameter grads; emits dx (size input_dim, overwritten),
  // dh_prev and dc_prev (overwritten).
  void step_backward(const LstmStepCache& cache, const std::vector<double>& dh,
                     const std::vector<double>& dc_in, double* dx, std::vector<double>* dh_prev,
                     std::vector<double>* dc_prev);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  std::size_t input_dim_ = 0, units_ = 0;
  // w: input_dim x units, u: units x units, b: units; per gate i/f/g/o.
  Param wi_, ui_, bi_, wf_, uf_, bf_, wg_, ug_, bg_, wo_, uo_, bo_;
};

}  // namespace hsd
