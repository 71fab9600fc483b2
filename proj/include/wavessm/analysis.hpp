#pragma once

#include <string>

#include "wavessm/metrics.hpp"
#include "wavessm/tensor.hpp"
#include "wavessm/wavelet.hpp"

namespace wavessm {

// Reflect-pads an [H,W,C] tensor on the bottom/right so both sides are even.
Tensor<float> pad_to_even(const Tensor<float>& img);

// Histogram distances after exchanging one subband group between a low-light
// image (a) and its normal-light reference (b).
struct SwapDistances {
  double a_with_b_high = 0;  // d(hist a, hist iwt(cA_a, highs_b))
  double a_with_b_low = 0;   // d(hist a, hist iwt(cA_b, highs_a))
  double b_with_a_high = 0;  // d(hist b, hist iwt(cA_b, highs_a))
  double b_with_a_low = 0;   // d(hist b, hist iwt(cA_a, highs_b))

  // Exchanging the high bands moves each image's histogram less than
  // exchanging the approximation band.
  bool high_swap_smaller() const { return a_with_b_high < a_with_b_low && b_with_a_high < b_with_a_low; }
};

SwapDistances swap_distances(const Tensor<float>& a, const Tensor<float>& b);

// JSON report (stable key order, schema in docs/report_schema.md). `b` may be null.
std::string analysis_report(const Tensor<float>& a, const Tensor<float>* b);

}  // namespace wavessm
