#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "wavessm/ssm.hpp"

using namespace wavessm;
using testing::random_tensor;

namespace {

// a_bar = 0.5 and b_bar = 1 everywhere, C = 1, no skip.
SsmParams<double> hand_params(std::size_t L) {
  const double a = -std::log(2.0);
  return {Tensor<double>(Shape{1, 1}, a), Tensor<double>(Shape{L, 1}, -a / 0.5),
          Tensor<double>(Shape{L, 1}, 1.0), Tensor<double>(Shape{1}, 0.0), Tensor<double>(Shape{L, 1}, 1.0)};
}

SsmParams<double> random_params(std::size_t L, std::size_t D, std::size_t N, std::mt19937_64& rng) {
  return {random_tensor(Shape{D, N}, rng, -4.0, -0.05), random_tensor(Shape{L, N}, rng),
          random_tensor(Shape{L, N}, rng), random_tensor(Shape{D}, rng),
          random_tensor(Shape{L, D}, rng, 1e-3, 0.5)};
}

}  // namespace

TEST_SUITE("ssm") {

TEST_CASE("zero-order hold closed form") {
  const auto d = discretize(-1.0, 2.0, 0.5);
  CHECK(d.a_bar == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(d.b_bar == doctest::Approx(0.786939).epsilon(1e-6));
  CHECK(d.a_bar == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(d.b_bar == doctest::Approx((std::exp(-0.5) - 1.0) / -0.5 * 0.5 * 2.0).epsilon(1e-14));
}

TEST_CASE("zero-order hold small-step limit") {
  const auto d = discretize(-1.0, 2.0, 1e-12);
  CHECK(d.a_bar == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(d.b_bar) < 1e-11);
}

TEST_CASE("Taylor branch joins the exact branch continuously") {
  for (double a : {-1.0, -3.0}) {
    const double below = 0.999 * kZohTaylorThreshold / -a, above = 1.001 * kZohTaylorThreshold / -a;
    const auto lo = discretize(a, 1.0, below), hi = discretize(a, 1.0, above);
    CHECK(lo.b_bar / below == doctest::Approx(hi.b_bar / above).epsilon(1e-6));
  }
}

TEST_CASE("gain partials match differences of the gain") {
  for (double a : {-2.0, -0.3, -1e-6})
    for (double delta : {0.01, 0.4}) {
      const double h = 1e-7;
      auto gain = [](double aa, double dd) { return discretize(aa, 1.0, dd).b_bar; };
      const auto p = zoh_gain_partials(a, delta);
      CHECK(p.d_delta == doctest::Approx((gain(a, delta + h) - gain(a, delta - h)) / (2 * h)).epsilon(1e-6));
      CHECK(p.d_a == doctest::Approx((gain(a + h, delta) - gain(a - h, delta)) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("combine operator") {
  const auto e = scan_combine(ScanElement<double>{0.5, 1}, ScanElement<double>{0.5, 1});
  CHECK(e.a == 0.25);
  CHECK(e.b == 1.5);
  const ScanElement<double> id;
  const ScanElement<double> x{0.3, -2};
  CHECK(scan_combine(id, x).a == x.a);
  CHECK(scan_combine(x, id).b == x.b);
}

TEST_CASE("combine is associative") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 100; ++i) {
    const ScanElement<double> a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const auto l = scan_combine(scan_combine(a, b), c), r = scan_combine(a, scan_combine(b, c));
    CHECK(std::abs(l.a - r.a) < 1e-12);
    CHECK(std::abs(l.b - r.b) < 1e-12);
  }
}

TEST_CASE("hand-unrolled recurrence") {
  const auto p = hand_params(3);
  const Tensor<double> u(Shape{3, 1}, 1.0);
  for (const auto& y : {selective_scan_seq(u, p), selective_scan_par(u, p), selective_scan_par(u, p, 1)}) {
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(y[2] == doctest::Approx(1.75).epsilon(1e-14));
  }
}

TEST_CASE("skip-only and unread-state cases") {
  std::mt19937_64 rng(22);
  const std::size_t L = 9, D = 3, N = 4;
  const auto u = random_tensor(Shape{L, D}, rng);
  auto p = random_params(L, D, N, rng);
  p.B.fill(0);
  p.Dskip.fill(1);
  CHECK(max_abs_diff(selective_scan_seq(u, p), u) == 0.0);
  CHECK(max_abs_diff(selective_scan_par(u, p), u) == 0.0);

  p = random_params(L, D, N, rng);
  p.C.fill(0);
  p.Dskip.fill(0);
  const auto out = selective_scan_par(u, p);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("length one equals one discretised step") {
  std::mt19937_64 rng(23);
  const std::size_t D = 2, N = 3;
  const auto p = random_params(1, D, N, rng);
  const auto u = random_tensor(Shape{1, D}, rng);
  const auto y = selective_scan_par(u, p);
  for (std::size_t d = 0; d < D; ++d) {
    double ref = p.Dskip[d] * u[d];
    for (std::size_t n = 0; n < N; ++n)
      ref += p.C[n] * discretize(p.A.at(d, n), p.B[n], p.Delta[d]).b_bar * u[d];
    CHECK(y[d] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("parallel scan matches the recurrence for any chunking") {
  std::mt19937_64 rng(24);
  for (std::size_t L : {1u, 2u, 3u, 17u, 255u, 256u, 257u, 600u}) {
    const auto p = random_params(L, 3, 5, rng);
    const auto u = random_tensor(Shape{L, 3}, rng);
    const auto seq = selective_scan_seq(u, p);
    for (std::size_t chunk : {1u, 7u, 64u, 256u}) CHECK(max_abs_diff(selective_scan_par(u, p, chunk), seq) < 1e-10);
  }
}

TEST_CASE("long stable streams stay bounded") {
  std::mt19937_64 rng(25);
  const std::size_t L = 100000, D = 2, N = 4;
  auto p = random_params(L, D, N, rng);
  p.C.fill(1);
  p.Dskip.fill(0);
  const auto u = random_tensor(Shape{L, D}, rng);
  // |y| <= sum_n |C| * max|b_bar u| / (1 - max a_bar)
  double bound = 0;
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) {
      double max_gain = 0, max_a = 0;
      for (std::size_t t = 0; t < L; ++t) {
        const auto z = discretize(p.A.at(d, n), p.B[t * N + n], p.Delta[t * D + d]);
        max_gain = std::max(max_gain, std::abs(z.b_bar * u[t * D + d]));
        max_a = std::max(max_a, z.a_bar);
      }
      bound = std::max(bound, N * max_gain / (1 - max_a));
    }
  const auto y = selective_scan_par(u, p);
  double peak = 0;
  for (double v : y.data()) {
    REQUIRE(std::isfinite(v));
    peak = std::max(peak, std::abs(v));
  }
  CHECK(peak <= bound);
}

TEST_CASE("invalid parameters are rejected") {
  std::mt19937_64 rng(26);
  auto p = random_params(4, 2, 3, rng);
  const auto u = random_tensor(Shape{4, 2}, rng);
  auto bad = p;
  bad.B = Tensor<double>(Shape{3, 3});
  CHECK_THROWS_AS(selective_scan_seq(u, bad), ShapeError);
  bad = p;
  bad.Delta.fill(-1);
  CHECK_THROWS(selective_scan_par(u, bad));
  bad = p;
  bad.A.fill(50);
  bad.Delta.fill(30);
  CHECK_THROWS_AS(selective_scan_seq(u, bad), NumericError);
}

TEST_CASE("single-precision scan agrees with double precision") {
  std::mt19937_64 rng(27);
  const auto p = random_params(300, 4, 16, rng);
  const auto u = random_tensor(Shape{300, 4}, rng);
  const SsmParams<float> pf{p.A.cast<float>(), p.B.cast<float>(), p.C.cast<float>(), p.Dskip.cast<float>(),
                            p.Delta.cast<float>()};
  const auto yd = selective_scan_par(u, p);
  const auto yf = selective_scan_par(u.cast<float>(), pf);
  CHECK(max_abs_diff(yf.cast<double>(), yd) < 1e-4);
}

}  // TEST_SUITE
