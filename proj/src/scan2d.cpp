#include "wavessm/scan2d.hpp"

#include <cmath>

namespace wavessm {

const char* direction_name(ScanDirection d) {
  switch (d) {
    case ScanDirection::kRowForward: return "row_forward";
    case ScanDirection::kRowReverse: return "row_reverse";
    case ScanDirection::kColForward: return "col_forward";
    case ScanDirection::kColReverse: return "col_reverse";
  }
  return "?";
}

std::vector<std::size_t> scan_order(ScanDirection d, std::size_t height, std::size_t width) {
  const std::size_t n = height * width;
  std::vector<std::size_t> order(n);
  for (std::size_t t = 0; t < n; ++t) {
    switch (d) {
      case ScanDirection::kRowForward: order[t] = t; break;
      case ScanDirection::kRowReverse: order[t] = n - 1 - t; break;
      case ScanDirection::kColForward: order[t] = (t % height) * width + t / height; break;
      case ScanDirection::kColReverse: {
        const std::size_t s = n - 1 - t;
        order[t] = (s % height) * width + s / height;
        break;
      }
    }
  }
  return order;
}

template <class T>
Tensor<T> unfold(const Tensor<T>& x, ScanDirection d) {
  if (x.rank() != 3) throw ShapeError("unfold: expected [H,W,C], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const auto order = scan_order(d, h, w);
  Tensor<T> seq(Shape{h * w, c});
  for (std::size_t t = 0; t < order.size(); ++t)
    for (std::size_t k = 0; k < c; ++k) seq[t * c + k] = x[order[t] * c + k];
  return seq;
}

template <class T>
Tensor<T> fold(const Tensor<T>& seq, ScanDirection d, std::size_t height, std::size_t width) {
  if (seq.rank() != 2 || seq.dim(0) != height * width)
    throw ShapeError("fold: sequence " + shape_str(seq.shape()) + " does not have length H*W = " +
                     std::to_string(height * width));
  const std::size_t c = seq.dim(1);
  const auto order = scan_order(d, height, width);
  Tensor<T> x(Shape{height, width, c});
  for (std::size_t t = 0; t < order.size(); ++t)
    for (std::size_t k = 0; k < c; ++k) x[order[t] * c + k] = seq[t * c + k];
  return x;
}

template <class T>
void init_ssm2d(ParamInit<T> init, std::size_t channels, std::size_t state_size) {
  const std::size_t D = channels, N = state_size;
  Tensor<T> a_log(Shape{D, N});
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) a_log.at(d, n) = static_cast<T>(std::log(static_cast<double>(n + 1)));
  init.add("A_log", std::move(a_log));
  init.constant("Dskip", Shape{D}, T{1});
  const T proj_bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));
  for (std::size_t k = 0; k < kScanDirections.size(); ++k) {
    auto dir = init.sub("dir" + std::to_string(k));
    dir.uniform("b_proj", Shape{D, N}, proj_bound);
    dir.uniform("c_proj", Shape{D, N}, proj_bound);
    dir.uniform("dt_proj.w", Shape{D, D}, proj_bound);
    Tensor<T> dt_bias(Shape{D});
    for (auto& v : dt_bias.data()) {
      double dt = std::exp(init.rng().uniform(std::log(1e-3), std::log(1e-1)));
      dt = std::max(dt, 1e-4);
      v = static_cast<T>(dt + std::log(-std::expm1(-dt)));  // inverse softplus
    }
    dir.add("dt_proj.b", std::move(dt_bias));
  }
}

template <class T>
ad::Var<T> ssm2d(const ad::Var<T>& x, const Scope<T>& w) {
  if (x.shape().size() != 3) throw ShapeError("ssm2d: expected [H,W,C], got " + shape_str(x.shape()));
  const std::size_t h = x.shape()[0], wd = x.shape()[1];
  const auto A = ad::scale(ad::exp(w["A_log"]), T{-1});
  const auto dskip = w["Dskip"];
  ad::Var<T> y;
  for (std::size_t k = 0; k < kScanDirections.size(); ++k) {
    const ScanDirection d = kScanDirections[k];
    const auto dir = w.sub("dir" + std::to_string(k));
    const auto u = ad::unfold(x, d);
    const auto B = ad::matmul(u, dir["b_proj"]);
    const auto C = ad::matmul(u, dir["c_proj"]);
    const auto delta =
        ad::activation(ad::add_bias(ad::matmul(u, dir["dt_proj.w"]), dir["dt_proj.b"]), Activation::kSoftplus);
    const auto folded = ad::fold(ad::selective_scan(u, delta, A, B, C, dskip), d, h, wd);
    y = y.defined() ? ad::add(y, folded) : folded;
  }
  return y;
}

#define WAVESSM_INSTANTIATE(T)                                                              \
  template Tensor<T> unfold(const Tensor<T>&, ScanDirection);                               \
  template Tensor<T> fold(const Tensor<T>&, ScanDirection, std::size_t, std::size_t);       \
  template void init_ssm2d(ParamInit<T>, std::size_t, std::size_t);                         \
  template ad::Var<T> ssm2d(const ad::Var<T>&, const Scope<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
