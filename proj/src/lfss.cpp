#include "wavessm/lfss.hpp"

#include "wavessm/scan2d.hpp"

namespace wavessm {

template <class T>
void init_vssm(ParamInit<T> init, std::size_t channels, std::size_t expansion, std::size_t state_size) {
  const std::size_t inner = expansion * channels;
  init.conv("in_linear", channels, inner, 1);
  init.conv("dw_conv", inner, inner, 3, inner);
  init_ssm2d(init.sub("ssm"), inner, state_size);
  init.layer_norm("out_norm", inner);
  init.conv("gate_linear", channels, inner, 1);
  init.conv("out_linear", inner, channels, 1);
}

template <class T>
ad::Var<T> vssm(const ad::Var<T>& x, const Scope<T>& w) {
  const auto inner = conv(w, "in_linear", x, 1);
  const std::size_t d = inner.shape().back();
  const auto mixed = ad::activation(conv(w, "dw_conv", inner, 3, d), Activation::kSiLU);
  const auto x1 = norm(w, "out_norm", ssm2d(mixed, w.sub("ssm")));
  const auto x2 = ad::activation(conv(w, "gate_linear", x, 1), Activation::kSiLU);
  return conv(w, "out_linear", ad::mul(x1, x2), 1);
}

template <class T>
void init_gffn(ParamInit<T> init, std::size_t channels) {
  init.layer_norm("norm", channels);
  init.conv("expand", channels, 2 * channels, 1);
  init.conv("dw", 2 * channels, 2 * channels, 3, 2 * channels);
  init.conv("out", channels, channels, 1);
}

template <class T>
ad::Var<T> gffn(const ad::Var<T>& x, const Scope<T>& w) {
  const auto expanded = conv(w, "expand", norm(w, "norm", x), 1);
  const std::size_t c2 = expanded.shape().back();
  if (c2 % 2 != 0) throw ConfigError("gffn: expanded channel count " + std::to_string(c2) + " is odd");
  const auto mixed = conv(w, "dw", expanded, 3, c2);
  const auto f1 = ad::slice_last(mixed, 0, c2 / 2);
  const auto f2 = ad::slice_last(mixed, c2 / 2, c2 / 2);
  return conv(w, "out", ad::mul(ad::activation(f1, Activation::kGELU), f2), 1);
}

template <class T>
void init_lfss_block(ParamInit<T> init, std::size_t channels, std::size_t expansion, std::size_t state_size) {
  init.layer_norm("norm1", channels);
  init_vssm(init.sub("vssm"), channels, expansion, state_size);
  init_gffn(init.sub("gffn"), channels);
  init.constant("beta", Shape{channels}, T{1});
  init.constant("gamma", Shape{channels}, T{1});
}

template <class T>
ad::Var<T> lfss_block(const ad::Var<T>& x, const Scope<T>& w) {
  const auto z = ad::add(vssm(norm(w, "norm1", x), w.sub("vssm")), ad::mul_channels(x, w["beta"]));
  return ad::add(gffn(z, w.sub("gffn")), ad::mul_channels(z, w["gamma"]));
}

#define WAVESSM_INSTANTIATE(T)                                                          \
  template void init_vssm(ParamInit<T>, std::size_t, std::size_t, std::size_t);         \
  template ad::Var<T> vssm(const ad::Var<T>&, const Scope<T>&);                         \
  template void init_gffn(ParamInit<T>, std::size_t);                                   \
  template ad::Var<T> gffn(const ad::Var<T>&, const Scope<T>&);                         \
  template void init_lfss_block(ParamInit<T>, std::size_t, std::size_t, std::size_t);   \
  template ad::Var<T> lfss_block(const ad::Var<T>&, const Scope<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
