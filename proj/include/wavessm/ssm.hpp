#pragma once

#include <cstddef>

#include "wavessm/tensor.hpp"

namespace wavessm {

// Selective state-space parameters for one sequence of length L with D
// channels and a diagonal state of size N per channel.
//   A:     [D, N]  continuous-time diagonal (negative for stable dynamics)
//   B, C:  [L, N]  input-dependent, shared by all channels at a time step
//   Dskip: [D]
//   Delta: [L, D]  strictly positive step sizes
template <class T>
struct SsmParams {
  Tensor<T> A, B, C, Dskip, Delta;
};

template <class T>
struct Discretized {
  T a_bar;
  T b_bar;
};

// Below this |delta * a| the input gain uses its third-order Taylor series.
inline constexpr double kZohTaylorThreshold = 1e-4;

// Zero-order hold: a_bar = exp(delta a), b_bar = (exp(delta a) - 1) / (delta a) * delta b.
template <class T>
Discretized<T> discretize(T a, T b, T delta);

// Partial derivatives of the ZOH input gain g(delta, a) = b_bar / b, taken on
// whichever branch discretize() uses for these arguments.
template <class T>
struct GainPartials {
  T d_delta;
  T d_a;
};
template <class T>
GainPartials<T> zoh_gain_partials(T a, T delta);

// (a1, b1) then (a2, b2): h -> a2 (a1 h + b1) + b2. Identity is (1, 0).
template <class T>
struct ScanElement {
  T a{1};
  T b{0};
};

template <class T>
constexpr ScanElement<T> scan_combine(const ScanElement<T>& first, const ScanElement<T>& second) {
  return {first.a * second.a, second.a * first.b + second.b};
}

inline constexpr std::size_t kScanChunk = 256;

// y_t[d] = <C_t, h_t[d]> + Dskip[d] u_t[d],  h_t[d] = a_bar h_{t-1}[d] + b_bar u_t[d],  h_0 = 0.
template <class T>
Tensor<T> selective_scan_seq(const Tensor<T>& u, const SsmParams<T>& p);

// Same contract, computed as a chunked reduce-then-scan: per-chunk aggregates
// are combined with a work-efficient (up-sweep / down-sweep) exclusive scan,
// then each chunk is replayed from its carry-in. Chunk layout depends only on
// L, so results do not depend on the thread count.
template <class T>
Tensor<T> selective_scan_par(const Tensor<T>& u, const SsmParams<T>& p, std::size_t chunk = kScanChunk);

template <class T>
struct SsmGrads {
  Tensor<T> du, dDelta, dA, dB, dC, dDskip;
};

// Reverse-mode gradients by a sequential backward recurrence.
template <class T>
SsmGrads<T> selective_scan_backward(const Tensor<T>& u, const SsmParams<T>& p, const Tensor<T>& dy);

template <class T>
void validate_ssm(const Tensor<T>& u, const SsmParams<T>& p);

}  // namespace wavessm
