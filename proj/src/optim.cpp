#include "wavessm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wavessm {

template <class T>
void adamw_step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads, OptimState<T>& state,
                double lr) {
  const AdamWConfig& hp = state.hp;
  ++state.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) continue;
    Tensor<T>& p = params.get_mut(name);
    if (!p.same_shape(g)) throw ShapeError("adamw_step: gradient for '" + name + "' has shape " + shape_str(g.shape()));
    Tensor<T>& m = state.m.try_emplace(name, p.shape()).first->second;
    Tensor<T>& v = state.v.try_emplace(name, p.shape()).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      double pi = static_cast<double>(p[i]) * (1.0 - lr * hp.weight_decay);
      const double mi = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
      const double vi = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      pi -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + hp.eps);
      p[i] = static_cast<T>(pi);
    }
  }
}

double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) return lr_min;
  const double frac = static_cast<double>(std::min(t, total)) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

template void adamw_step(ParamStore<float>&, const std::map<std::string, Tensor<float>>&, OptimState<float>&, double);
template void adamw_step(ParamStore<double>&, const std::map<std::string, Tensor<double>>&, OptimState<double>&,
                         double);

}  // namespace wavessm
