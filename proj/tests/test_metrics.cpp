#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "support.hpp"
#include "wavessm/analysis.hpp"
#include "wavessm/image_io.hpp"
#include "wavessm/metrics.hpp"

using namespace wavessm;
using testing::random_tensor;

namespace {

// Mean SSIM over every fully contained 11x11 window, written out directly.
double ssim_oracle(const Tensor<double>& a, const Tensor<double>& b) {
  auto gray = [](const Tensor<double>& t, std::size_t i, std::size_t j) {
    return 0.299 * t.at(i, j, 0) + 0.587 * t.at(i, j, 1) + 0.114 * t.at(i, j, 2);
  };
  double g[11], gs = 0;
  for (int k = 0; k < 11; ++k) gs += (g[k] = std::exp(-(k - 5) * (k - 5) / (2 * 1.5 * 1.5)));
  for (double& v : g) v /= gs;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::size_t H = a.dim(0), W = a.dim(1);
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t i = 0; i + 11 <= H; ++i)
    for (std::size_t j = 0; j + 11 <= W; ++j) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t u = 0; u < 11; ++u)
        for (std::size_t v = 0; v < 11; ++v) {
          const double w = g[u] * g[v], x = gray(a, i + u, j + v), y = gray(b, i + u, j + v);
          mx += w * x;
          my += w * y;
          xx += w * x * x;
          yy += w * y * y;
          xy += w * x * y;
        }
      const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr examples") {
  std::mt19937_64 rng(91);
  const auto a = random_tensor(Shape{8, 8, 3}, rng, 0.0, 0.5);
  CHECK(psnr(a, a) == kPsnrIdentical);
  const auto b = add(a, Tensor<double>(a.shape(), 0.5));
  CHECK(psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(4.0)).epsilon(1e-14));
  const auto c = random_tensor(Shape{8, 8, 3}, rng, 0.0, 1.0);
  CHECK(psnr(a, c) == psnr(c, a));
}

TEST_CASE("psnr falls as noise grows") {
  std::mt19937_64 rng(92);
  const auto clean = random_tensor(Shape{16, 16, 3}, rng, 0.2, 0.8);
  const auto noise = random_tensor(Shape{16, 16, 3}, rng);
  double previous = INFINITY;
  for (double amp : {0.001, 0.01, 0.05, 0.1, 0.2}) {
    const double p = psnr(clean, add(clean, scale(noise, amp)));
    CHECK(p < previous);
    previous = p;
  }
}

TEST_CASE("ssim of an image with itself is exactly one") {
  std::mt19937_64 rng(93);
  const auto a = random_tensor(Shape{20, 17, 3}, rng, 0.0, 1.0);
  CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("ssim of a binary image and its negative is negative") {
  std::mt19937_64 rng(94);
  Tensor<double> a(Shape{24, 24, 3});
  for (std::size_t p = 0; p < 24 * 24; ++p) {
    const double v = (rng() & 1) ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) a[p * 3 + c] = v;
  }
  CHECK(ssim(a, sub(Tensor<double>(a.shape(), 1.0), a)) < 0.0);
}

TEST_CASE("ssim matches the windowed oracle") {
  std::mt19937_64 rng(95);
  for (auto shape : {Shape{11, 11, 3}, Shape{23, 31, 3}, Shape{40, 16, 3}}) {
    const auto a = random_tensor(shape, rng, 0.0, 1.0);
    auto b = add(scale(a, 0.6), scale(random_tensor(shape, rng, 0.0, 1.0), 0.4));
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    CHECK(std::abs(ssim(a.cast<float>(), b.cast<float>()) - ssim_oracle(a, b)) < 1e-5);
  }
  CHECK_THROWS_AS(ssim(Tensor<double>(Shape{10, 20, 3}), Tensor<double>(Shape{10, 20, 3})), ShapeError);
  CHECK_THROWS_AS(ssim(Tensor<double>(Shape{12, 12, 3}), Tensor<double>(Shape{12, 13, 3})), ShapeError);
}

TEST_CASE("luma weights") {
  const Tensor<double> px(Shape{1, 1, 3}, std::vector<double>{1, 0.5, 0.25});
  CHECK(luma(px)[0] == doctest::Approx(0.299 + 0.5 * 0.587 + 0.25 * 0.114).epsilon(1e-15));
}

TEST_CASE("histogram examples") {
  const auto zero = histogram(Tensor<double>(Shape{4, 4, 3}, 0.0));
  const auto one = histogram(Tensor<double>(Shape{4, 4, 3}, 1.0));
  CHECK(zero.total == 16);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(zero.count(c, 0) == 16);
    CHECK(one.count(c, 255) == 16);
  }
  Tensor<double> two(Shape{4, 4, 1});
  for (std::size_t p = 0; p < 16; ++p) two[p] = p < 8 ? 0.25 : 0.75;
  const auto h = histogram(two);
  CHECK(h.count(0, 64) == 8);
  CHECK(h.count(0, 192) == 8);
  std::uint64_t total = 0;
  for (auto v : h.counts) total += v;
  CHECK(total == h.total);
}

TEST_CASE("out-of-range values are clipped and counted") {
  const Tensor<double> t(Shape{1, 3, 1}, std::vector<double>{-0.5, 0.5, 1.5});
  const auto h = histogram(t);
  CHECK(h.clipped == 2);
  CHECK(h.count(0, 0) == 1);
  CHECK(h.count(0, 255) == 1);
  CHECK(h.count(0, 128) == 1);
  Tensor<double> bad(Shape{1, 1, 1}, std::nan(""));
  CHECK_THROWS_AS(histogram(bad), NumericError);
}

TEST_CASE("histogram distance") {
  std::mt19937_64 rng(96);
  const auto a = histogram(random_tensor(Shape{8, 8, 3}, rng, 0.0, 1.0));
  const auto b = histogram(random_tensor(Shape{8, 8, 3}, rng, 0.0, 1.0));
  CHECK(hist_distance(a, a) == 0.0);
  CHECK(hist_distance(a, b) == hist_distance(b, a));
  const auto lo = histogram(Tensor<double>(Shape{2, 2, 3}, 0.0));
  const auto hi = histogram(Tensor<double>(Shape{2, 2, 3}, 1.0));
  CHECK(hist_distance(lo, hi) == 2.0);
  CHECK_THROWS(hist_distance(a, histogram(Tensor<double>(Shape{2, 2, 3}), 16)));
}

}  // TEST_SUITE

TEST_SUITE("analysis") {

TEST_CASE("constant image puts all energy in the approximation band") {
  const auto report = nlohmann::json::parse(analysis_report(Tensor<float>(Shape{6, 10, 3}, 0.4f), nullptr));
  CHECK(report.at("schema") == "wavessm.analyze/1");
  CHECK(report.at("images").at("a").at("low_fraction") == 1.0);
  CHECK_FALSE(report.contains("swap"));
  CHECK_FALSE(report.at("images").contains("b"));
}

TEST_CASE("odd images are reflect padded for the transform") {
  std::mt19937_64 rng(97);
  const auto img = random_tensor<float>(Shape{7, 9, 3}, rng, 0.0, 1.0);
  const auto padded = pad_to_even(img);
  CHECK(padded.shape() == Shape{8, 10, 3});
  CHECK(padded.at(7, 0, 0) == img.at(5, 0, 0));
  CHECK(padded.at(0, 9, 2) == img.at(0, 7, 2));
  const auto report = nlohmann::json::parse(analysis_report(img, nullptr));
  const auto& a = report.at("images").at("a");
  CHECK(a.at("height") == 7);
  CHECK(a.at("padded_height") == 8);
  CHECK(a.at("padded_width") == 10);
  CHECK(a.at("histogram").at("counts").size() == 3);
}

TEST_CASE("pair report carries the swap distances") {
  std::mt19937_64 rng(98);
  const auto a = random_tensor<float>(Shape{8, 8, 3}, rng, 0.0, 0.3);
  const auto b = random_tensor<float>(Shape{8, 8, 3}, rng, 0.4, 1.0);
  const auto d = swap_distances(a, b);
  const auto report = nlohmann::json::parse(analysis_report(a, &b));
  CHECK(report.at("swap").at("a_with_b_high") == d.a_with_b_high);
  CHECK(report.at("swap").at("b_with_a_low") == d.b_with_a_low);
  CHECK(report.at("swap").at("high_swap_smaller") == d.high_swap_smaller());
  CHECK(swap_distances(a, a).a_with_b_low == 0.0);
}

}  // TEST_SUITE

TEST_SUITE("image_io") {

TEST_CASE("ppm round trip is bit exact") {
  std::mt19937_64 rng(99);
  Image img{5, 3, std::vector<std::uint8_t>(45)};
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng());
  const auto bytes = encode_ppm(img);
  CHECK(bytes.substr(0, 11) == "P6\n5 3\n255\n");
  const auto back = decode_ppm(bytes);
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.rgb == img.rgb);
  CHECK(encode_ppm(back) == bytes);
  CHECK(from_tensor(to_tensor(img)).rgb == img.rgb);
}

TEST_CASE("header comments and whitespace are accepted") {
  const std::string bytes = std::string("P6 # made by hand\n 2\t1 # size\n255\n") + "abcdef";
  const auto img = decode_ppm(bytes);
  CHECK(img.width == 2);
  CHECK(img.rgb[5] == 'f');
}

TEST_CASE("malformed files are rejected") {
  CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n1 2 3"), FormatError);
  CHECK_THROWS_AS(decode_ppm("P6\n2 2\n255\nabc"), FormatError);
  CHECK_THROWS_AS(decode_ppm("P6\n1 1\n65535\nabcdef"), FormatError);
  CHECK_THROWS_AS(decode_ppm("P6\n0 1\n255\n"), FormatError);
  CHECK_THROWS_AS(decode_ppm(""), FormatError);
  CHECK_THROWS_AS(read_ppm("/nonexistent/definitely_missing.ppm"), IoError);
}

TEST_CASE("quantisation rounds half up and clamps") {
  CHECK(quantize(0.0f) == 0);
  CHECK(quantize(1.0f) == 255);
  CHECK(quantize(-0.3f) == 0);
  CHECK(quantize(7.0f) == 255);
  CHECK(quantize(2.51f / 255.0f) == 3);
  CHECK(quantize(2.49f / 255.0f) == 2);
  CHECK(quantize(std::nanf("")) == 0);
  for (int v = 0; v < 256; ++v) CHECK(quantize(static_cast<float>(v) / 255.0f) == v);
}

}  // TEST_SUITE
