#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "wavessm/scan2d.hpp"
#include "wavessm/ssm.hpp"

using namespace wavessm;
using testing::random_tensor;

namespace {

const Tensor<double> kTwoByTwo(Shape{2, 2, 1}, std::vector<double>{1, 2, 3, 4});

std::vector<double> values(const Tensor<double>& t) { return t.vec(); }

ParamStore<double> ssm2d_weights(std::size_t channels, std::size_t state, std::uint64_t seed) {
  ParamStore<double> store;
  Rng rng(seed);
  init_ssm2d(ParamInit<double>(store, rng), channels, state);
  return store;
}

Tensor<double> rotate180(const Tensor<double>& x) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t k = 0; k < c; ++k) out.at(h - 1 - i, w - 1 - j, k) = x.at(i, j, k);
  return out;
}

}  // namespace

TEST_SUITE("scan2d") {

TEST_CASE("unfold orders on a 2x2 map") {
  CHECK(values(unfold(kTwoByTwo, ScanDirection::kRowForward)) == std::vector<double>{1, 2, 3, 4});
  CHECK(values(unfold(kTwoByTwo, ScanDirection::kColForward)) == std::vector<double>{1, 3, 2, 4});
  CHECK(values(unfold(kTwoByTwo, ScanDirection::kRowReverse)) == std::vector<double>{4, 3, 2, 1});
  CHECK(values(unfold(kTwoByTwo, ScanDirection::kColReverse)) == std::vector<double>{4, 2, 3, 1});
}

TEST_CASE("fold examples") {
  const Tensor<double> seq(Shape{4, 1}, std::vector<double>{1, 3, 2, 4});
  CHECK(max_abs_diff(fold(seq, ScanDirection::kColForward, 2, 2), kTwoByTwo) == 0.0);
  for (auto d : kScanDirections) {
    const auto out = fold(Tensor<double>(Shape{6, 2}, 1.5), d, 2, 3);
    for (double v : out.data()) CHECK(v == 1.5);
  }
}

TEST_CASE("fold inverts unfold for every direction") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng() % 9, w = 1 + rng() % 9, c = 1 + rng() % 3;
    const auto x = random_tensor(Shape{h, w, c}, rng);
    for (auto d : kScanDirections) {
      const auto seq = unfold(x, d);
      CHECK(seq.shape() == Shape{h * w, c});
      CHECK(max_abs_diff(fold(seq, d, h, w), x) == 0.0);
      const auto order = scan_order(d, h, w);
      std::vector<bool> seen(h * w, false);
      for (auto i : order) seen.at(i) = true;
      CHECK(std::find(seen.begin(), seen.end(), false) == seen.end());
    }
  }
}

TEST_CASE("zero scan weights with unit skip give four copies") {
  std::mt19937_64 rng(32);
  auto w = ssm2d_weights(3, 4, 1);
  testing::fill_matching(w, "b_proj", 0.0);
  testing::fill_matching(w, "c_proj", 0.0);
  testing::fill_matching(w, "dt_proj.w", 0.0);
  const auto x = random_tensor(Shape{5, 4, 3}, rng);
  const auto y = testing::eval<double>(w, [&](const Scope<double>& s) { return ssm2d(ad::Var<double>(x), s); });
  CHECK(max_abs_diff(y, scale(x, 4.0)) < 1e-14);
}

TEST_CASE("single pixel is four single-step scans") {
  std::mt19937_64 rng(33);
  const std::size_t D = 3, N = 4;
  const auto w = ssm2d_weights(D, N, 2);
  const auto x = random_tensor(Shape{1, 1, D}, rng);
  const auto y = testing::eval<double>(w, [&](const Scope<double>& s) { return ssm2d(ad::Var<double>(x), s); });
  for (std::size_t d = 0; d < D; ++d) {
    double ref = 0;
    for (int k = 0; k < 4; ++k) {
      const std::string dir = "dir" + std::to_string(k) + ".";
      const auto& bp = w.get(dir + "b_proj");
      const auto& cp = w.get(dir + "c_proj");
      const auto& dw = w.get(dir + "dt_proj.w");
      double z = w.get(dir + "dt_proj.b")[d];
      for (std::size_t e = 0; e < D; ++e) z += x[e] * dw.at(e, d);
      const double delta = std::log1p(std::exp(z));
      double acc = w.get("Dskip")[d] * x[d];
      for (std::size_t n = 0; n < N; ++n) {
        double b = 0, c = 0;
        for (std::size_t e = 0; e < D; ++e) {
          b += x[e] * bp.at(e, n);
          c += x[e] * cp.at(e, n);
        }
        const double a = -std::exp(w.get("A_log").at(d, n));
        acc += c * discretize(a, b, delta).b_bar * x[d];
      }
      ref += acc;
    }
    CHECK(y[d] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("180 degree rotation swaps forward and reverse scans") {
  std::mt19937_64 rng(34);
  const auto w = ssm2d_weights(2, 3, 3);
  ParamStore<double> swapped;
  for (const auto& n : w.names()) {
    std::string m = n;
    if (n.rfind("dir", 0) == 0) {
      static const char partner[] = {'1', '0', '3', '2'};
      m[3] = partner[n[3] - '0'];
    }
    swapped.add(n, w.get(m));
  }
  const auto x = random_tensor(Shape{4, 4, 2}, rng);
  const auto y = testing::eval<double>(w, [&](const Scope<double>& s) { return ssm2d(ad::Var<double>(x), s); });
  const auto yr = testing::eval<double>(
      swapped, [&](const Scope<double>& s) { return ssm2d(ad::Var<double>(rotate180(x)), s); });
  CHECK(max_abs_diff(yr, rotate180(y)) < 1e-12);
}

TEST_CASE("large maps stay finite and keep their shape") {
  std::mt19937_64 rng(35);
  const auto w = ssm2d_weights(32, 16, 4).cast<float>();
  const auto x = random_tensor<float>(Shape{64, 64, 32}, rng);
  const auto y = testing::eval<float>(w, [&](const Scope<float>& s) { return ssm2d(ad::Var<float>(x), s); });
  CHECK(y.shape() == x.shape());
  CHECK_NOTHROW(check_finite(y, "ssm2d"));
}

}  // TEST_SUITE
