#include "wavessm/hfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wavessm {

namespace {
thread_local FmtRoutingProbe* active_probe = nullptr;
}  // namespace

FmtRoutingProbe::FmtRoutingProbe() : previous_(active_probe), min_margin_(std::numeric_limits<double>::infinity()) {
  active_probe = this;
}

FmtRoutingProbe::~FmtRoutingProbe() { active_probe = previous_; }

void FmtRoutingProbe::record(const FmtMatch& m) {
  ++calls_;
  for (std::size_t i = 0; i < m.indices.size(); ++i) {
    min_margin_ = std::min(min_margin_, m.margins[i]);
    signature_ = (signature_ ^ (m.indices[i] + 1)) * 1099511628211ULL;
  }
  if (previous_) previous_->record(m);
}

template <class T>
FmtMatch fmt_match(const Tensor<T>& low, const Tensor<T>& high) {
  if (low.rank() != 3 || high.rank() != 3)
    throw ShapeError("fmt: inputs must be [H,W,C], got " + shape_str(low.shape()) + " and " + shape_str(high.shape()));
  if (low.dim(0) != high.dim(0) || low.dim(1) != high.dim(1))
    throw ShapeError("fmt: spatial shapes differ (" + shape_str(low.shape()) + " vs " + shape_str(high.shape()) + ")");
  const std::size_t pixels = low.dim(0) * low.dim(1), cl = low.dim(2), ch = high.dim(2);
  const double inf = std::numeric_limits<double>::infinity();
  FmtMatch m{std::vector<std::size_t>(ch), std::vector<double>(ch), std::vector<double>(ch)};
  for (std::size_t i = 0; i < ch; ++i) {
    double best = inf, second = inf;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < cl; ++j) {
      double d2 = 0;
      for (std::size_t p = 0; p < pixels; ++p) {
        const double diff = static_cast<double>(low[p * cl + j]) - static_cast<double>(high[p * ch + i]);
        d2 += diff * diff;
      }
      if (d2 < best) {
        second = best;
        best = d2;
        arg = j;
      } else if (d2 < second) {
        second = d2;
      }
    }
    m.indices[i] = arg;
    m.distances[i] = std::sqrt(best);
    m.margins[i] = std::sqrt(second) - std::sqrt(best);
  }
  if (active_probe) active_probe->record(m);
  return m;
}

template <class T>
void init_fmt(ParamInit<T> init, std::size_t channels) {
  init.conv("attn", 2 * channels, 2 * channels, 1);
  init.conv("body", 2 * channels, 2 * channels, 3);
  init.conv("out", 2 * channels, channels, 1);
}

template <class T>
ad::Var<T> fmt(const ad::Var<T>& low, const ad::Var<T>& high, const Scope<T>& w, FmtMatch* match) {
  FmtMatch m = fmt_match(low.value(), high.value());
  const auto y = ad::concat_last<T>({ad::gather_last(low, m.indices), high});
  if (match) *match = std::move(m);
  const auto gate = ad::activation(conv(w, "attn", y, 1), Activation::kSigmoid);
  return conv(w, "out", ad::mul(gate, conv(w, "body", y, 3)), 1);
}

template <class T>
void init_fmta(ParamInit<T> init, std::size_t channels, std::size_t heads) {
  if (heads == 0 || channels % heads != 0)
    throw ConfigError("fmta: heads (" + std::to_string(heads) + ") must divide channels (" +
                      std::to_string(channels) + ")");
  init.conv("qkv", channels, 3 * channels, 1);
  init.conv("qkv_dw", 3 * channels, 3 * channels, 3, 3 * channels);
  init_fmt(init.sub("fmt"), channels);
  init.constant("alpha", Shape{heads}, static_cast<T>(std::sqrt(static_cast<double>(channels / heads))));
  init.conv("proj", channels, channels, 1);
}

template <class T>
ad::Var<T> fmta(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w,
                std::vector<Tensor<T>>* attention) {
  const std::size_t h = high.shape()[0], wd = high.shape()[1], c = high.shape()[2];
  const auto alpha = w["alpha"];
  const std::size_t heads = alpha.value().size();
  if (heads == 0 || c % heads != 0)
    throw ConfigError("fmta: heads (" + std::to_string(heads) + ") must divide channels (" + std::to_string(c) + ")");
  const std::size_t per_head = c / heads;

  const auto qkv = conv(w, "qkv_dw", conv(w, "qkv", high, 1), 3, 3 * c);
  const auto q = fmt(low, ad::slice_last(qkv, 0, c), w.sub("fmt"));
  const auto k = ad::slice_last(qkv, c, c);
  const auto v = ad::slice_last(qkv, 2 * c, c);

  auto channel_major = [&](const ad::Var<T>& x) { return ad::transpose(ad::reshape(x, Shape{h * wd, c})); };
  const auto qm = channel_major(q), km = channel_major(k), vm = channel_major(v);
  const T eps = static_cast<T>(kAttentionNormEps);

  std::vector<ad::Var<T>> outs;
  if (attention) attention->clear();
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const auto qh = ad::l2_normalize_rows(ad::slice_rows(qm, hd * per_head, per_head), eps);
    const auto kh = ad::l2_normalize_rows(ad::slice_rows(km, hd * per_head, per_head), eps);
    const auto vh = ad::slice_rows(vm, hd * per_head, per_head);
    const auto logits = ad::div_by_element(ad::matmul(kh, ad::transpose(qh)), alpha, hd);
    const auto a = ad::softmax(logits, 1);
    if (attention) attention->push_back(a.value());
    outs.push_back(ad::matmul(a, vh));
  }
  const auto merged = ad::reshape(ad::transpose(ad::concat_rows(outs)), Shape{h, wd, c});
  return conv(w, "proj", merged, 1);
}

template <class T>
void init_fcfn(ParamInit<T> init, std::size_t channels) {
  init.layer_norm("norm", channels);
  init.conv("pw", channels, channels, 1);
  init.conv("dw", channels, channels, 3, channels);
  init_fmt(init.sub("fmt"), channels);
}

template <class T>
ad::Var<T> fcfn(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w) {
  const std::size_t c = high.shape().back();
  const auto mixed = conv(w, "dw", conv(w, "pw", norm(w, "norm", high), 1), 3, c);
  return fmt(low, mixed, w.sub("fmt"));
}

template <class T>
void init_hfe_block(ParamInit<T> init, std::size_t channels, std::size_t heads) {
  init.layer_norm("norm1", channels);
  init_fmta(init.sub("fmta"), channels, heads);
  init.layer_norm("norm2", channels);
  init_fcfn(init.sub("fcfn"), channels);
}

template <class T>
ad::Var<T> hfe_block(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w) {
  const auto f1 = ad::add(fmta(norm(w, "norm1", high), low, w.sub("fmta")), high);
  return ad::add(fcfn(norm(w, "norm2", f1), low, w.sub("fcfn")), f1);
}

template <class T>
void init_skff(ParamInit<T> init, std::size_t channels) {
  const std::size_t hidden = std::max<std::size_t>(channels / 4, 1);
  init.conv("down", channels, hidden, 1);
  for (int k = 0; k < 3; ++k) init.conv("fc" + std::to_string(k), hidden, channels, 1);
}

template <class T>
ad::Var<T> skff(const ad::Var<T>& b0, const ad::Var<T>& b1, const ad::Var<T>& b2, const Scope<T>& w,
                Tensor<T>* weights) {
  check_same_shape(b0.value(), b1.value(), "skff");
  check_same_shape(b0.value(), b2.value(), "skff");
  const std::size_t c = b0.shape().back();
  const auto pooled = ad::mean_spatial(ad::add(ad::add(b0, b1), b2));
  const auto z = conv(w, "down", pooled, 1);
  const auto logits = ad::concat_last<T>({conv(w, "fc0", z, 1), conv(w, "fc1", z, 1), conv(w, "fc2", z, 1)});
  const auto probs = ad::transpose(ad::softmax(ad::transpose(ad::reshape(logits, Shape{3, c})), 1));
  if (weights) *weights = probs.value();
  const std::vector<ad::Var<T>> bands{b0, b1, b2};
  ad::Var<T> out;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto wk = ad::reshape(ad::slice_rows(probs, k, 1), Shape{c});
    const auto term = ad::mul_channels(bands[k], wk);
    out = out.defined() ? ad::add(out, term) : term;
  }
  return out;
}

#define WAVESSM_INSTANTIATE(T)                                                                         \
  template FmtMatch fmt_match(const Tensor<T>&, const Tensor<T>&);                                     \
  template void init_fmt(ParamInit<T>, std::size_t);                                                   \
  template ad::Var<T> fmt(const ad::Var<T>&, const ad::Var<T>&, const Scope<T>&, FmtMatch*);          \
  template void init_fmta(ParamInit<T>, std::size_t, std::size_t);                                     \
  template ad::Var<T> fmta(const ad::Var<T>&, const ad::Var<T>&, const Scope<T>&,                      \
                           std::vector<Tensor<T>>*);                                                   \
  template void init_fcfn(ParamInit<T>, std::size_t);                                                  \
  template ad::Var<T> fcfn(const ad::Var<T>&, const ad::Var<T>&, const Scope<T>&);                     \
  template void init_hfe_block(ParamInit<T>, std::size_t, std::size_t);                                \
  template ad::Var<T> hfe_block(const ad::Var<T>&, const ad::Var<T>&, const Scope<T>&);                \
  template void init_skff(ParamInit<T>, std::size_t);                                                  \
  template ad::Var<T> skff(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&, const Scope<T>&,   \
                           Tensor<T>*);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
