#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wavessm/autodiff.hpp"
#include "wavessm/params.hpp"
#include "wavessm/tensor.hpp"

namespace wavessm {

// For every high-frequency channel i, the low-frequency channel whose map
// (flattened over H*W) is nearest in Euclidean distance. Ties go to the
// lowest low-frequency index.
struct FmtMatch {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  std::vector<double> margins;  // second-best minus best distance (inf with one candidate)
};

// Observes every fmt_match call on the current thread while alive: the
// smallest margin seen and a hash of all chosen indices. Finite-difference
// checks use it to stay away from points where the routing would flip.
class FmtRoutingProbe {
 public:
  FmtRoutingProbe();
  ~FmtRoutingProbe();
  FmtRoutingProbe(const FmtRoutingProbe&) = delete;
  FmtRoutingProbe& operator=(const FmtRoutingProbe&) = delete;

  double min_margin() const noexcept { return min_margin_; }
  std::uint64_t signature() const noexcept { return signature_; }
  std::size_t calls() const noexcept { return calls_; }

  void record(const FmtMatch& m);

 private:
  FmtRoutingProbe* previous_;
  double min_margin_;
  std::uint64_t signature_ = 1469598103934665603ULL;
  std::size_t calls_ = 0;
};

template <class T>
FmtMatch fmt_match(const Tensor<T>& low, const Tensor<T>& high);

// Frequency matching transformation:
//   Y   = concat(low[..., match], high)                         (2C channels)
//   out = out( Sigmoid(attn(Y)) * body(Y) )
// attn and out are 1x1, body is a dense 3x3. The routing indices are treated as
// constants when differentiating.
template <class T>
void init_fmt(ParamInit<T> init, std::size_t channels);
template <class T>
ad::Var<T> fmt(const ad::Var<T>& low, const ad::Var<T>& high, const Scope<T>& w, FmtMatch* match = nullptr);

// Frequency-matched transposed (channel) attention. Q, K, V come from a 1x1
// then depth-wise 3x3 projection of the high band, Q is replaced by its
// frequency-matched version, and per head
//   A = softmax(K^ Q^T / alpha_h)   over (C/heads) x (C/heads)
// with K^, Q^ L2-normalised along the spatial axis; out = proj(A V).
// When `attention` is non-null it receives each head's A.
template <class T>
void init_fmta(ParamInit<T> init, std::size_t channels, std::size_t heads);
template <class T>
ad::Var<T> fmta(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w,
                std::vector<Tensor<T>>* attention = nullptr);

// Frequency correction feed-forward: fmt(dw(pw(LN(x))), low).
template <class T>
void init_fcfn(ParamInit<T> init, std::size_t channels);
template <class T>
ad::Var<T> fcfn(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w);

// F' = fmta(LN(x), low) + x;  out = fcfn(LN(F'), low) + F'
template <class T>
void init_hfe_block(ParamInit<T> init, std::size_t channels, std::size_t heads);
template <class T>
ad::Var<T> hfe_block(const ad::Var<T>& high, const ad::Var<T>& low, const Scope<T>& w);

// Selective kernel feature fusion of three same-shape bands:
//   s = mean_HW(b0 + b1 + b2);  z = down(s)  (C -> max(C/4, 1))
//   logits_k = fc_k(z);  w = softmax over k per channel;  out = sum_k w_k * b_k
// When `weights` is non-null it receives the [3, C] branch weights.
template <class T>
void init_skff(ParamInit<T> init, std::size_t channels);
template <class T>
ad::Var<T> skff(const ad::Var<T>& b0, const ad::Var<T>& b1, const ad::Var<T>& b2, const Scope<T>& w,
                Tensor<T>* weights = nullptr);

inline constexpr double kAttentionNormEps = 1e-12;

}  // namespace wavessm
