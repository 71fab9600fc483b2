#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "wavessm/autodiff.hpp"
#include "wavessm/params.hpp"
#include "wavessm/tensor.hpp"

namespace testing {

using wavessm::Shape;
using wavessm::Tensor;

template <class T = double>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

// Runs a block with constant weights and returns its value.
template <class T>
Tensor<T> eval(const wavessm::ParamStore<T>& store,
               const std::function<wavessm::ad::Var<T>(const wavessm::Scope<T>&)>& fn) {
  wavessm::ParamBinder<T> binder(store, nullptr);
  return fn(wavessm::Scope<T>(binder, "")).value();
}

template <class T>
void fill_matching(wavessm::ParamStore<T>& store, const std::string& suffix, T value) {
  for (const auto& n : store.names())
    if (n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
      store.get_mut(n).fill(value);
}

// Zeroes every convolution weight and bias (names ending in ".w" / ".b").
template <class T>
void zero_convs(wavessm::ParamStore<T>& store) {
  fill_matching(store, ".w", T{0});
  fill_matching(store, ".b", T{0});
}

}  // namespace testing
