#include "wavessm/wavelet.hpp"

#include "wavessm/parallel.hpp"

namespace wavessm {
namespace {

template <class T>
void check_subbands(const WaveletSubbands<T>& s, const char* what) {
  check_same_shape(s.cA, s.cH, what);
  check_same_shape(s.cA, s.cV, what);
  check_same_shape(s.cA, s.cD, what);
  if (s.cA.rank() != 3) throw ShapeError(std::string(what) + ": subbands must be [H,W,C]");
}

template <class T>
void check_even(const Tensor<T>& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + ": input must be [H,W,C], got " + shape_str(x.shape()));
  if (x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0)
    throw ShapeError(std::string(what) + ": height and width must be even, got " + shape_str(x.shape()) +
                     "; reflect-pad the input first");
}

// Shared kernel for the split and packed layouts: band b of output pixel
// (i, j, c) lives at out[b](i, j, c).
template <class T, class Store>
void forward_blocks(const Tensor<T>& x, Store store) {
  const std::size_t h2 = x.dim(0) / 2, w2 = x.dim(1) / 2, c = x.dim(2);
  parallel_for(h2, 16, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < w2; ++j)
        for (std::size_t k = 0; k < c; ++k) {
          const T p00 = x.at(2 * i, 2 * j, k), p01 = x.at(2 * i, 2 * j + 1, k);
          const T p10 = x.at(2 * i + 1, 2 * j, k), p11 = x.at(2 * i + 1, 2 * j + 1, k);
          store(i, j, k, (p00 + p01 + p10 + p11) / T{2}, (p00 - p01 + p10 - p11) / T{2},
                (p00 + p01 - p10 - p11) / T{2}, (p00 - p01 - p10 + p11) / T{2});
        }
  });
}

template <class T, class Load>
Tensor<T> inverse_blocks(std::size_t h2, std::size_t w2, std::size_t c, Load load) {
  Tensor<T> x(Shape{2 * h2, 2 * w2, c});
  parallel_for(h2, 16, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < w2; ++j)
        for (std::size_t k = 0; k < c; ++k) {
          T a, hh, v, d;
          load(i, j, k, a, hh, v, d);
          x.at(2 * i, 2 * j, k) = (a + hh + v + d) / T{2};
          x.at(2 * i, 2 * j + 1, k) = (a - hh + v - d) / T{2};
          x.at(2 * i + 1, 2 * j, k) = (a + hh - v - d) / T{2};
          x.at(2 * i + 1, 2 * j + 1, k) = (a - hh - v + d) / T{2};
        }
  });
  return x;
}

}  // namespace

template <class T>
WaveletSubbands<T> dwt2(const Tensor<T>& x) {
  check_even(x, "dwt2");
  const Shape half{x.dim(0) / 2, x.dim(1) / 2, x.dim(2)};
  WaveletSubbands<T> s{Tensor<T>(half), Tensor<T>(half), Tensor<T>(half), Tensor<T>(half)};
  forward_blocks(x, [&](std::size_t i, std::size_t j, std::size_t k, T a, T hh, T v, T d) {
    s.cA.at(i, j, k) = a;
    s.cH.at(i, j, k) = hh;
    s.cV.at(i, j, k) = v;
    s.cD.at(i, j, k) = d;
  });
  return s;
}

template <class T>
Tensor<T> iwt2(const WaveletSubbands<T>& s) {
  check_subbands(s, "iwt2");
  return inverse_blocks<T>(s.cA.dim(0), s.cA.dim(1), s.cA.dim(2),
                           [&](std::size_t i, std::size_t j, std::size_t k, T& a, T& hh, T& v, T& d) {
                             a = s.cA.at(i, j, k);
                             hh = s.cH.at(i, j, k);
                             v = s.cV.at(i, j, k);
                             d = s.cD.at(i, j, k);
                           });
}

template <class T>
Tensor<T> dwt2_packed(const Tensor<T>& x) {
  check_even(x, "dwt2");
  const std::size_t c = x.dim(2);
  Tensor<T> out(Shape{x.dim(0) / 2, x.dim(1) / 2, 4 * c});
  forward_blocks(x, [&](std::size_t i, std::size_t j, std::size_t k, T a, T hh, T v, T d) {
    T* p = &out.at(i, j, 0);
    p[k] = a;
    p[c + k] = hh;
    p[2 * c + k] = v;
    p[3 * c + k] = d;
  });
  return out;
}

template <class T>
Tensor<T> iwt2_packed(const Tensor<T>& packed) {
  if (packed.rank() != 3 || packed.dim(2) % 4 != 0)
    throw ShapeError("iwt2: packed subbands must be [H,W,4C], got " + shape_str(packed.shape()));
  const std::size_t c = packed.dim(2) / 4;
  return inverse_blocks<T>(packed.dim(0), packed.dim(1), c,
                           [&](std::size_t i, std::size_t j, std::size_t k, T& a, T& hh, T& v, T& d) {
                             const T* p = &packed.at(i, j, 0);
                             a = p[k];
                             hh = p[c + k];
                             v = p[2 * c + k];
                             d = p[3 * c + k];
                           });
}

template <class T>
std::pair<WaveletSubbands<T>, WaveletSubbands<T>> swap_subbands(const WaveletSubbands<T>& a,
                                                                const WaveletSubbands<T>& b,
                                                                SubbandGroup which) {
  check_subbands(a, "swap_subbands");
  check_subbands(b, "swap_subbands");
  check_same_shape(a.cA, b.cA, "swap_subbands");
  WaveletSubbands<T> a2 = a, b2 = b;
  if (which == SubbandGroup::kLow) {
    std::swap(a2.cA, b2.cA);
  } else {
    std::swap(a2.cH, b2.cH);
    std::swap(a2.cV, b2.cV);
    std::swap(a2.cD, b2.cD);
  }
  return {std::move(a2), std::move(b2)};
}

template <class T>
SubbandEnergy subband_energy(const WaveletSubbands<T>& s) {
  auto sq = [](const Tensor<T>& t) {
    double e = 0;
    for (auto v : t.data()) e += static_cast<double>(v) * static_cast<double>(v);
    return e;
  };
  return SubbandEnergy{sq(s.cA), sq(s.cH), sq(s.cV), sq(s.cD)};
}

#define WAVESSM_INSTANTIATE(T)                                                              \
  template struct WaveletSubbands<T>;                                                       \
  template WaveletSubbands<T> dwt2(const Tensor<T>&);                                       \
  template Tensor<T> iwt2(const WaveletSubbands<T>&);                                       \
  template Tensor<T> dwt2_packed(const Tensor<T>&);                                         \
  template Tensor<T> iwt2_packed(const Tensor<T>&);                                         \
  template std::pair<WaveletSubbands<T>, WaveletSubbands<T>> swap_subbands(                 \
      const WaveletSubbands<T>&, const WaveletSubbands<T>&, SubbandGroup);                  \
  template SubbandEnergy subband_energy(const WaveletSubbands<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
