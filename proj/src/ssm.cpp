#include "wavessm/ssm.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "wavessm/parallel.hpp"

namespace wavessm {

namespace {

// e^x - 1 given e^x; away from 0 the subtraction loses nothing.
template <class T>
T expm1_from(T x, T ex) {
  return std::abs(x) >= T{0.5} ? ex - T{1} : std::expm1(x);
}

}  // namespace

template <class T>
Discretized<T> discretize(T a, T b, T delta) {
  if (!(delta > 0)) throw ShapeError("discretize: delta must be positive, got " + std::to_string(delta));
  const T x = delta * a;
  const T a_bar = std::exp(x);
  T gain;
  if (std::abs(x) < static_cast<T>(kZohTaylorThreshold)) {
    gain = delta * (T{1} + x / T{2} + x * x / T{6});
  } else {
    gain = expm1_from(x, a_bar) / x * delta;
  }
  return {a_bar, gain * b};
}

template <class T>
GainPartials<T> zoh_gain_partials(T a, T delta) {
  const T x = delta * a;
  if (std::abs(x) < static_cast<T>(kZohTaylorThreshold))
    return {T{1} + x + x * x / T{2}, delta * delta * (T{0.5} + x / T{3})};
  const T ex = std::exp(x);
  return {ex, delta * delta * (x * ex - expm1_from(x, ex)) / (x * x)};
}

template <class T>
void validate_ssm(const Tensor<T>& u, const SsmParams<T>& p) {
  if (u.rank() != 2) throw ShapeError("selective_scan: input must be [L,D], got " + shape_str(u.shape()));
  const std::size_t L = u.dim(0), D = u.dim(1);
  if (p.A.rank() != 2 || p.A.dim(0) != D)
    throw ShapeError("selective_scan: A must be [D,N] with D=" + std::to_string(D) + ", got " +
                     shape_str(p.A.shape()));
  const std::size_t N = p.A.dim(1);
  if (p.B.shape() != Shape{L, N}) throw ShapeError("selective_scan: B must be [L,N], got " + shape_str(p.B.shape()));
  if (p.C.shape() != Shape{L, N}) throw ShapeError("selective_scan: C must be [L,N], got " + shape_str(p.C.shape()));
  if (p.Dskip.size() != D) throw ShapeError("selective_scan: Dskip must have D entries, got " + shape_str(p.Dskip.shape()));
  if (p.Delta.shape() != Shape{L, D})
    throw ShapeError("selective_scan: Delta must be [L,D], got " + shape_str(p.Delta.shape()));
  for (std::size_t i = 0; i < p.Delta.size(); ++i)
    if (!(p.Delta[i] > 0))
      throw ShapeError("selective_scan: Delta must be positive (flat index " + std::to_string(i) + ")");
}

namespace {

template <class T>
void fail_non_finite(std::size_t t, std::size_t d) {
  throw NumericError("selective_scan: non-finite state at step " + std::to_string(t) + ", channel " +
                     std::to_string(d) + " (exploding parameters?)");
}

}  // namespace

template <class T>
Tensor<T> selective_scan_seq(const Tensor<T>& u, const SsmParams<T>& p) {
  validate_ssm(u, p);
  const std::size_t L = u.dim(0), D = u.dim(1), N = p.A.dim(1);
  Tensor<T> y(Shape{L, D});
  parallel_for(D, 1, [&](std::size_t d0, std::size_t d1) {
    std::vector<T> h(N);
    for (std::size_t d = d0; d < d1; ++d) {
      std::fill(h.begin(), h.end(), T{0});
      for (std::size_t t = 0; t < L; ++t) {
        const T ut = u.at(t, d);
        const T delta = p.Delta.at(t, d);
        T acc = 0;
        bool finite = true;
        for (std::size_t n = 0; n < N; ++n) {
          const auto z = discretize(p.A.at(d, n), p.B.at(t, n), delta);
          h[n] = z.a_bar * h[n] + z.b_bar * ut;
          finite = finite && std::isfinite(h[n]);
          acc += p.C.at(t, n) * h[n];
        }
        if (!finite) fail_non_finite<T>(t, d);
        y.at(t, d) = acc + p.Dskip[d] * ut;
      }
    }
  });
  return y;
}

template <class T>
Tensor<T> selective_scan_par(const Tensor<T>& u, const SsmParams<T>& p, std::size_t chunk) {
  validate_ssm(u, p);
  if (chunk == 0) chunk = kScanChunk;
  const std::size_t L = u.dim(0), D = u.dim(1), N = p.A.dim(1);
  const std::size_t chunks = (L + chunk - 1) / chunk;
  std::size_t padded = 1;
  while (padded < chunks) padded *= 2;

  // Phase 1: aggregate of each (channel, chunk, state) cell. Layout [D][padded][N].
  std::vector<ScanElement<T>> agg(D * padded * N);
  parallel_for(D * chunks, 1, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      const std::size_t d = j / chunks, c = j % chunks;
      ScanElement<T>* out = &agg[(d * padded + c) * N];
      const std::size_t t1 = std::min(L, (c + 1) * chunk);
      for (std::size_t t = c * chunk; t < t1; ++t) {
        const T ut = u.at(t, d);
        const T delta = p.Delta.at(t, d);
        for (std::size_t n = 0; n < N; ++n) {
          const auto z = discretize(p.A.at(d, n), p.B.at(t, n), delta);
          out[n] = scan_combine(out[n], ScanElement<T>{z.a_bar, z.b_bar * ut});
        }
      }
    }
  });

  // Phase 2: exclusive up-sweep / down-sweep scan over chunk aggregates.
  parallel_for(D, 1, [&](std::size_t d0, std::size_t d1) {
    for (std::size_t d = d0; d < d1; ++d) {
      ScanElement<T>* e = &agg[d * padded * N];
      for (std::size_t n = 0; n < N; ++n) {
        auto at = [&](std::size_t i) -> ScanElement<T>& { return e[i * N + n]; };
        for (std::size_t stride = 1; stride < padded; stride *= 2)
          for (std::size_t i = 0; i < padded; i += 2 * stride)
            at(i + 2 * stride - 1) = scan_combine(at(i + stride - 1), at(i + 2 * stride - 1));
        at(padded - 1) = ScanElement<T>{};
        for (std::size_t stride = padded / 2; stride >= 1; stride /= 2) {
          for (std::size_t i = 0; i < padded; i += 2 * stride) {
            const ScanElement<T> left = at(i + stride - 1);
            at(i + stride - 1) = at(i + 2 * stride - 1);
            at(i + 2 * stride - 1) = scan_combine(at(i + 2 * stride - 1), left);
          }
          if (stride == 1) break;
        }
      }
    }
  });

  // Phase 3: replay each chunk from its carry-in state and read out y.
  Tensor<T> y(Shape{L, D});
  parallel_for(D * chunks, 1, [&](std::size_t j0, std::size_t j1) {
    std::vector<T> h(N);
    for (std::size_t j = j0; j < j1; ++j) {
      const std::size_t d = j / chunks, c = j % chunks;
      const ScanElement<T>* carry = &agg[(d * padded + c) * N];
      for (std::size_t n = 0; n < N; ++n) h[n] = carry[n].b;
      const std::size_t t1 = std::min(L, (c + 1) * chunk);
      for (std::size_t t = c * chunk; t < t1; ++t) {
        const T ut = u.at(t, d);
        const T delta = p.Delta.at(t, d);
        T acc = 0;
        bool finite = true;
        for (std::size_t n = 0; n < N; ++n) {
          const auto z = discretize(p.A.at(d, n), p.B.at(t, n), delta);
          h[n] = z.a_bar * h[n] + z.b_bar * ut;
          finite = finite && std::isfinite(h[n]);
          acc += p.C.at(t, n) * h[n];
        }
        if (!finite) fail_non_finite<T>(t, d);
        y.at(t, d) = acc + p.Dskip[d] * ut;
      }
    }
  });
  return y;
}

template <class T>
SsmGrads<T> selective_scan_backward(const Tensor<T>& u, const SsmParams<T>& p, const Tensor<T>& dy) {
  validate_ssm(u, p);
  check_same_shape(u, dy, "selective_scan_backward");
  const std::size_t L = u.dim(0), D = u.dim(1), N = p.A.dim(1);
  SsmGrads<T> g{Tensor<T>(u.shape()), Tensor<T>(p.Delta.shape()), Tensor<T>(p.A.shape()),
                Tensor<T>(p.B.shape()), Tensor<T>(p.C.shape()), Tensor<T>(p.Dskip.shape())};
  std::vector<T> hs((L + 1) * N);  // hs[t+1] = h_t, hs[0] = 0
  std::vector<T> a_bar(L * N), gain(L * N);
  std::vector<T> dh(N);
  for (std::size_t d = 0; d < D; ++d) {
    std::fill(hs.begin(), hs.begin() + static_cast<std::ptrdiff_t>(N), T{0});
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t n = 0; n < N; ++n) {
        const auto z = discretize(p.A.at(d, n), T{1}, p.Delta.at(t, d));
        a_bar[t * N + n] = z.a_bar;
        gain[t * N + n] = z.b_bar;
        hs[(t + 1) * N + n] = z.a_bar * hs[t * N + n] + z.b_bar * p.B.at(t, n) * u.at(t, d);
      }
    }
    std::fill(dh.begin(), dh.end(), T{0});
    for (std::size_t t = L; t-- > 0;) {
      const T ut = u.at(t, d);
      const T gy = dy.at(t, d);
      const T delta = p.Delta.at(t, d);
      g.dDskip[d] += gy * ut;
      T du = p.Dskip[d] * gy;
      T ddelta = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T a = p.A.at(d, n);
        const T b = p.B.at(t, n);
        const T h_t = hs[(t + 1) * N + n];
        const T h_prev = hs[t * N + n];
        const T ab = a_bar[t * N + n], gn = gain[t * N + n];
        g.dC.at(t, n) += gy * h_t;
        // dh currently holds the contribution carried back from step t+1.
        const T dht = dh[n] + p.C.at(t, n) * gy;
        const auto gp = zoh_gain_partials(a, delta);
        const T da_bar = dht * h_prev;
        const T db_bar = dht * ut;
        du += dht * (gn * b);
        // a_bar = exp(delta a), b_bar = b g(delta, a)
        ddelta += da_bar * ab * a + db_bar * b * gp.d_delta;
        g.dA.at(d, n) += da_bar * ab * delta + db_bar * b * gp.d_a;
        g.dB.at(t, n) += db_bar * gn;
        dh[n] = dht * ab;
      }
      g.du.at(t, d) = du;
      g.dDelta.at(t, d) = ddelta;
    }
  }
  return g;
}

#define WAVESSM_INSTANTIATE(T)                                                               \
  template Discretized<T> discretize(T, T, T);                                               \
  template GainPartials<T> zoh_gain_partials(T, T);                                          \
  template void validate_ssm(const Tensor<T>&, const SsmParams<T>&);                         \
  template Tensor<T> selective_scan_seq(const Tensor<T>&, const SsmParams<T>&);              \
  template Tensor<T> selective_scan_par(const Tensor<T>&, const SsmParams<T>&, std::size_t); \
  template SsmGrads<T> selective_scan_backward(const Tensor<T>&, const SsmParams<T>&,        \
                                               const Tensor<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
