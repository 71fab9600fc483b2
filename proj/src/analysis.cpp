#include "wavessm/analysis.hpp"

#include <json.hpp>

namespace wavessm {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kSchema = "wavessm.analyze/1";

json histogram_json(const Histogram& h) {
  json counts = json::array();
  for (std::size_t c = 0; c < h.channels; ++c)
    counts.push_back(std::vector<std::uint64_t>(h.counts.begin() + static_cast<std::ptrdiff_t>(c * h.bins),
                                                h.counts.begin() + static_cast<std::ptrdiff_t>((c + 1) * h.bins)));
  return json{{"bins", h.bins}, {"channels", h.channels}, {"total", h.total}, {"clipped", h.clipped},
              {"counts", counts}};
}

json image_json(const Tensor<float>& img) {
  const auto padded = pad_to_even(img);
  const SubbandEnergy e = subband_energy(dwt2(padded));
  return json{{"height", img.dim(0)},
              {"width", img.dim(1)},
              {"padded_height", padded.dim(0)},
              {"padded_width", padded.dim(1)},
              {"energy", {{"cA", e.cA}, {"cH", e.cH}, {"cV", e.cV}, {"cD", e.cD}, {"total", e.total()}}},
              {"low_fraction", e.low_fraction()},
              {"histogram", histogram_json(histogram(img))}};
}

}  // namespace

Tensor<float> pad_to_even(const Tensor<float>& img) {
  if (img.rank() != 3) throw ShapeError("pad_to_even: expected [H,W,C], got " + shape_str(img.shape()));
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const std::size_t hp = h + h % 2, wp = w + w % 2;
  if (hp == h && wp == w) return img;
  auto src = [](std::size_t i, std::size_t n) {
    return static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(n)));
  };
  Tensor<float> out(Shape{hp, wp, c});
  for (std::size_t y = 0; y < hp; ++y)
    for (std::size_t x = 0; x < wp; ++x)
      for (std::size_t k = 0; k < c; ++k) out.at(y, x, k) = img.at(src(y, h), src(x, w), k);
  return out;
}

SwapDistances swap_distances(const Tensor<float>& a, const Tensor<float>& b) {
  check_same_shape(a, b, "swap_distances");
  const auto sa = dwt2(pad_to_even(a)), sb = dwt2(pad_to_even(b));
  const auto [a_low_b_high, b_low_a_high] = swap_subbands(sa, sb, SubbandGroup::kHigh);
  const auto ha = histogram(a), hb = histogram(b);
  // Reconstructions are compared on the unpadded region.
  auto hist_of = [&](const WaveletSubbands<float>& s) {
    const auto full = iwt2(s);
    Tensor<float> crop(a.shape());
    for (std::size_t y = 0; y < a.dim(0); ++y)
      for (std::size_t x = 0; x < a.dim(1); ++x)
        for (std::size_t k = 0; k < a.dim(2); ++k) crop.at(y, x, k) = full.at(y, x, k);
    return histogram(crop);
  };
  const auto h_a_low_b_high = hist_of(a_low_b_high), h_b_low_a_high = hist_of(b_low_a_high);
  SwapDistances d;
  d.a_with_b_high = hist_distance(ha, h_a_low_b_high);
  d.a_with_b_low = hist_distance(ha, h_b_low_a_high);
  d.b_with_a_high = hist_distance(hb, h_b_low_a_high);
  d.b_with_a_low = hist_distance(hb, h_a_low_b_high);
  return d;
}

std::string analysis_report(const Tensor<float>& a, const Tensor<float>* b) {
  json report;
  report["schema"] = kSchema;
  report["images"]["a"] = image_json(a);
  if (b) {
    report["images"]["b"] = image_json(*b);
    const SwapDistances d = swap_distances(a, *b);
    report["swap"] = json{{"a_with_b_high", d.a_with_b_high},
                          {"a_with_b_low", d.a_with_b_low},
                          {"b_with_a_high", d.b_with_a_high},
                          {"b_with_a_low", d.b_with_a_low},
                          {"high_swap_smaller", d.high_swap_smaller()}};
  }
  return report.dump(2) + "\n";
}

}  // namespace wavessm
