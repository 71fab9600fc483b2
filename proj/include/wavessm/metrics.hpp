#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "wavessm/tensor.hpp"

namespace wavessm {

// Returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) for images in [0,1].
template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// ITU-R BT.601 luma of an [H,W,3] image as [H,W,1]; single-channel images pass through.
template <class T>
Tensor<T> luma(const Tensor<T>& img);

// Mean SSIM over all fully contained 11x11 Gaussian windows of the luma
// (dynamic range 1). Both sides must be at least 11 pixels.
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

// Per-channel counts over [0,1]; bin k covers [k/bins, (k+1)/bins) and the
// last bin also takes 1.0. Out-of-range values are clipped and counted.
struct Histogram {
  std::size_t bins = 0;
  std::size_t channels = 0;
  std::uint64_t total = 0;    // pixels per channel
  std::uint64_t clipped = 0;  // values that fell outside [0,1]
  std::vector<std::uint64_t> counts;  // [channel][bin]

  std::uint64_t count(std::size_t channel, std::size_t bin) const { return counts[channel * bins + bin]; }
};

inline constexpr std::size_t kHistogramBins = 256;

template <class T>
Histogram histogram(const Tensor<T>& img, std::size_t bins = kHistogramBins);

// L1 distance of the normalised histograms averaged over channels, in [0,2].
double hist_distance(const Histogram& a, const Histogram& b);

}  // namespace wavessm
