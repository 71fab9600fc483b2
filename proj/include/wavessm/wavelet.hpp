#pragma once

#include <utility>

#include "wavessm/tensor.hpp"

namespace wavessm {

// One level of the orthonormal 2D Haar transform. Each subband is
// [H/2, W/2, C]; order is always (cA, cH, cV, cD).
template <class T>
struct WaveletSubbands {
  Tensor<T> cA, cH, cV, cD;
};

enum class SubbandGroup { kLow, kHigh };

// On each 2x2 block [[p00, p01], [p10, p11]]:
//   cA = (p00 + p01 + p10 + p11) / 2     cH = (p00 - p01 + p10 - p11) / 2
//   cV = (p00 + p01 - p10 - p11) / 2     cD = (p00 - p01 - p10 + p11) / 2
// Throws ShapeError for odd H or W; callers pad first.
template <class T> WaveletSubbands<T> dwt2(const Tensor<T>& x);
template <class T> Tensor<T> iwt2(const WaveletSubbands<T>& s);

// Channel-packed forms used inside the network: [H/2, W/2, 4C] with channel
// blocks cA | cH | cV | cD.
template <class T> Tensor<T> dwt2_packed(const Tensor<T>& x);
template <class T> Tensor<T> iwt2_packed(const Tensor<T>& packed);

// Exchanges cA (kLow) or cH, cV, cD (kHigh) between a and b.
template <class T>
std::pair<WaveletSubbands<T>, WaveletSubbands<T>> swap_subbands(const WaveletSubbands<T>& a,
                                                                const WaveletSubbands<T>& b,
                                                                SubbandGroup which);

struct SubbandEnergy {
  double cA = 0, cH = 0, cV = 0, cD = 0;
  double total() const { return cA + cH + cV + cD; }
  double low_fraction() const { return total() > 0 ? cA / total() : 1.0; }
  double high_fraction() const { return total() > 0 ? (cH + cV + cD) / total() : 0.0; }
};

template <class T> SubbandEnergy subband_energy(const WaveletSubbands<T>& s);

}  // namespace wavessm
