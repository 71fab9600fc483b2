#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "wavessm/params.hpp"
#include "wavessm/tensor.hpp"

namespace wavessm {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

template <class T>
struct OptimState {
  AdamWConfig hp;
  std::uint64_t step = 0;
  std::map<std::string, Tensor<T>> m, v;  // first / second moments by parameter name
};

// One decoupled-weight-decay Adam update at learning rate `lr`:
//   p -= lr * wd * p;  m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   p -= lr * m_hat / (sqrt(v_hat) + eps)
// Parameters without an entry in `grads` are left untouched.
template <class T>
void adamw_step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads, OptimState<T>& state,
                double lr);

// lr(t) = lr_min + (lr_max - lr_min) (1 + cos(pi t / total)) / 2, t clamped to [0, total].
double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min);

}  // namespace wavessm
