#include "wavessm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "wavessm/parallel.hpp"

namespace wavessm {

template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "psnr");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  if (se == 0) return kPsnrIdentical;
  return 10.0 * std::log10(static_cast<double>(a.size()) / se);
}

template <class T>
Tensor<T> luma(const Tensor<T>& img) {
  if (img.rank() != 3) throw ShapeError("luma: expected [H,W,C], got " + shape_str(img.shape()));
  if (img.dim(2) == 1) return img;
  if (img.dim(2) != 3) throw ShapeError("luma: expected 1 or 3 channels, got " + std::to_string(img.dim(2)));
  const std::size_t n = img.dim(0) * img.dim(1);
  Tensor<T> y(Shape{img.dim(0), img.dim(1), 1});
  for (std::size_t p = 0; p < n; ++p)
    y[p] = static_cast<T>(0.299 * img[3 * p] + 0.587 * img[3 * p + 1] + 0.114 * img[3 * p + 2]);
  return y;
}

namespace {

std::vector<double> gaussian_window() {
  std::vector<double> g(kSsimWindow);
  const double c = (kSsimWindow - 1) / 2.0;
  double s = 0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2 * kSsimSigma * kSsimSigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

}  // namespace

template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "ssim");
  const Tensor<T> ya = luma(a), yb = luma(b);
  const std::size_t h = ya.dim(0), w = ya.dim(1), k = kSsimWindow;
  if (h < k || w < k)
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                     std::to_string(k) + "x" + std::to_string(k) + " window");
  const auto g = gaussian_window();
  const std::size_t oh = h - k + 1, ow = w - k + 1;

  // Horizontal pass of the five moment images, then vertical pass per output.
  enum { kA, kB, kAA, kBB, kAB, kMoments };
  std::vector<double> rows(kMoments * h * ow);
  parallel_for(h, 8, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t x = 0; x < ow; ++x) {
        double m[kMoments] = {0, 0, 0, 0, 0};
        for (std::size_t j = 0; j < k; ++j) {
          const double va = ya[r * w + x + j], vb = yb[r * w + x + j];
          m[kA] += g[j] * va;
          m[kB] += g[j] * vb;
          m[kAA] += g[j] * va * va;
          m[kBB] += g[j] * vb * vb;
          m[kAB] += g[j] * va * vb;
        }
        for (int q = 0; q < kMoments; ++q) rows[(q * h + r) * ow + x] = m[q];
      }
  });

  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  std::vector<double> row_sums(oh);
  parallel_for(oh, 8, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      double acc = 0;
      for (std::size_t x = 0; x < ow; ++x) {
        double m[kMoments] = {0, 0, 0, 0, 0};
        for (std::size_t i = 0; i < k; ++i)
          for (int q = 0; q < kMoments; ++q) m[q] += g[i] * rows[(q * h + y + i) * ow + x];
        const double va = m[kAA] - m[kA] * m[kA], vb = m[kBB] - m[kB] * m[kB], cov = m[kAB] - m[kA] * m[kB];
        acc += ((2 * m[kA] * m[kB] + c1) * (2 * cov + c2)) /
               ((m[kA] * m[kA] + m[kB] * m[kB] + c1) * (va + vb + c2));
      }
      row_sums[y] = acc;
    }
  });
  double total = 0;
  for (double s : row_sums) total += s;
  return total / static_cast<double>(oh * ow);
}

template <class T>
Histogram histogram(const Tensor<T>& img, std::size_t bins) {
  if (img.rank() != 3) throw ShapeError("histogram: expected [H,W,C], got " + shape_str(img.shape()));
  if (bins == 0) throw ShapeError("histogram: bins must be positive");
  check_finite(img, "histogram");
  Histogram hist;
  hist.bins = bins;
  hist.channels = img.dim(2);
  hist.total = img.dim(0) * img.dim(1);
  hist.counts.assign(hist.channels * bins, 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = img[i];
    if (v < 0 || v > 1) {
      ++hist.clipped;
      v = std::clamp(v, 0.0, 1.0);
    }
    const std::size_t bin = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
    ++hist.counts[(i % hist.channels) * bins + bin];
  }
  return hist;
}

double hist_distance(const Histogram& a, const Histogram& b) {
  if (a.bins != b.bins || a.channels != b.channels)
    throw ShapeError("hist_distance: histograms differ in layout (" + std::to_string(a.channels) + "x" +
                     std::to_string(a.bins) + " vs " + std::to_string(b.channels) + "x" + std::to_string(b.bins) + ")");
  if (a.total == 0 || b.total == 0) throw ShapeError("hist_distance: empty histogram");
  double sum = 0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    double d = 0;
    for (std::size_t k = 0; k < a.bins; ++k)
      d += std::abs(static_cast<double>(a.count(c, k)) / a.total - static_cast<double>(b.count(c, k)) / b.total);
    sum += d;
  }
  return sum / static_cast<double>(a.channels);
}

#define WAVESSM_INSTANTIATE(T)                                   \
  template double psnr(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> luma(const Tensor<T>&);                     \
  template double ssim(const Tensor<T>&, const Tensor<T>&);      \
  template Histogram histogram(const Tensor<T>&, std::size_t);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
