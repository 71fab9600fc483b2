#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "wavessm/gradcheck.hpp"
#include "wavessm/lfss.hpp"
#include "wavessm/optim.hpp"

using namespace wavessm;
using testing::random_tensor;

TEST_SUITE("autodiff") {

TEST_CASE("gradient of a sum is all ones") {
  std::mt19937_64 rng(81);
  ad::Tape<double> tape;
  const auto x = tape.leaf(random_tensor(Shape{3, 4}, rng), "x");
  const auto g = tape.backward(ad::sum(x)).grads.at("x");
  CHECK(g.shape() == Shape{3, 4});
  for (double v : g.data()) CHECK(v == 1.0);
}

TEST_CASE("L1 loss values and subgradient") {
  std::mt19937_64 rng(82);
  const auto t = random_tensor(Shape{2, 5}, rng);
  CHECK(ad::l1_loss(ad::Var<double>(t), ad::Var<double>(t)).value()[0] == 0.0);
  CHECK(ad::l1_loss(ad::Var<double>(add(t, Tensor<double>(t.shape(), 0.5))), ad::Var<double>(t)).value()[0] ==
        doctest::Approx(0.5).epsilon(1e-15));

  const auto p = random_tensor(Shape{2, 5}, rng);
  double ref = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ref += std::abs(p[i] - t[i]);
  CHECK(ad::l1_loss(ad::Var<double>(p), ad::Var<double>(t)).value()[0] == doctest::Approx(ref / 10).epsilon(1e-15));

  auto q = p;
  q[3] = t[3];
  ad::Tape<double> tape;
  const auto x = tape.leaf(q, "x");
  const auto g = tape.backward(ad::l1_loss(x, ad::Var<double>(t))).grads.at("x");
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double s = q[i] > t[i] ? 1.0 : (q[i] < t[i] ? -1.0 : 0.0);
    CHECK(g[i] == s / 10);
  }
  CHECK(g[3] == 0.0);
}

TEST_CASE("non-scalar losses are rejected") {
  ad::Tape<double> tape;
  const auto x = tape.leaf(Tensor<double>(Shape{2}, 1.0), "x");
  CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("leaves the loss never touches are listed") {
  ad::Tape<double> tape;
  const auto x = tape.leaf(Tensor<double>(Shape{2}, 1.0), "x");
  tape.leaf(Tensor<double>(Shape{2}, 1.0), "unused");
  const auto r = tape.backward(ad::sum(x));
  CHECK(r.detached == std::vector<std::string>{"unused"});
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(83);
  ParamStore<double> store;
  Rng init_rng(3);
  init_lfss_block(ParamInit<double>(store, init_rng), 4, 2, 4);
  const auto x = random_tensor(Shape{4, 4, 4}, rng);
  const auto wf = random_tensor(Shape{4, 4, 4}, rng), wg = random_tensor(Shape{4, 4, 4}, rng);
  const double a = 0.7, b = -1.3;

  auto grads = [&](double ca, double cb) {
    ad::Tape<double> tape;
    ParamBinder<double> binder(store, &tape);
    const auto y = lfss_block(ad::Var<double>(x), Scope<double>(binder, ""));
    const auto loss = ad::add(ad::scale(ad::weighted_sum(y, wf), ca), ad::scale(ad::weighted_sum(ad::mul(y, y), wg), cb));
    return tape.backward(loss).grads;
  };
  const auto gf = grads(1, 0), gg = grads(0, 1), gc = grads(a, b);
  double worst = 0;
  for (const auto& [name, g] : gc)
    worst = std::max(worst, max_abs_diff(g, add(scale(gf.at(name), a), scale(gg.at(name), b))));
  CHECK(worst < 1e-10);
}

TEST_CASE("every suite case passes its finite-difference check") {
  const auto ops = gradcheck_suite_ops();
  CHECK(ops.size() >= 45);
  for (const auto& op : ops) {
    if (op == "network") continue;  // exercised by the acceptance run
    for (const auto& r : run_gradcheck_suite(op, 1)) {
      INFO(r.op << " " << r.tensor << " error " << r.error << " note " << r.note);
      CHECK(r.passed());
    }
  }
  CHECK_THROWS_AS(run_gradcheck_suite("no_such_op"), ConfigError);
}

TEST_CASE("a wrong backward is caught") {
  // Forward is x^2 but the recorded gradient claims 3x.
  GradcheckProblem problem;
  std::mt19937_64 rng(84);
  problem.inputs = {random_tensor(Shape{5}, rng)};
  problem.fn = [](const Scope<double>&, const std::vector<ad::Var<double>>& in) {
    const auto& x = in[0];
    if (!x.tracked()) return ad::mul(x, x);
    return x.tape()->record(mul(x.value(), x.value()), "bad_square", {x}, [x](const Tensor<double>& g) {
      x.tape()->accumulate(x, mul(g, scale(x.value(), 3.0)));
    });
  };
  const auto r = gradcheck("bad_square", problem, GradcheckOptions{}, 1);
  REQUIRE(r.size() == 1);
  CHECK_FALSE(r[0].passed());
  CHECK(r[0].tensor == "input0");
}

TEST_CASE("zero gradient and no decay leave parameters alone") {
  std::mt19937_64 rng(85);
  ParamStore<double> p;
  p.add("w", random_tensor(Shape{3, 2}, rng));
  const auto before = p.get("w");
  OptimState<double> s;
  s.hp.weight_decay = 0;
  std::map<std::string, Tensor<double>> g{{"w", Tensor<double>(Shape{3, 2})}};
  for (int i = 0; i < 5; ++i) adamw_step(p, g, s, 1e-2);
  CHECK(max_abs_diff(p.get("w"), before) == 0.0);
  CHECK(s.step == 5);

  g["w"] = Tensor<double>(Shape{2, 3});
  CHECK_THROWS_AS(adamw_step(p, g, s, 1e-2), ShapeError);
}

TEST_CASE("decoupled weight decay shrinks parameters") {
  ParamStore<double> p;
  p.add("w", Tensor<double>(Shape{1}, 2.0));
  OptimState<double> s;
  s.hp.weight_decay = 0.1;
  adamw_step(p, {{"w", Tensor<double>(Shape{1})}}, s, 0.5);
  CHECK(p.get("w")[0] == doctest::Approx(2.0 * (1 - 0.5 * 0.1)).epsilon(1e-15));
}

TEST_CASE("first step moves by the learning rate") {
  ParamStore<double> p;
  p.add("w", Tensor<double>(Shape{2}, std::vector<double>{1.0, -1.0}));
  OptimState<double> s;
  s.hp.weight_decay = 0;
  adamw_step(p, {{"w", Tensor<double>(Shape{2}, std::vector<double>{0.3, -5.0})}}, s, 0.01);
  CHECK(p.get("w")[0] == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(p.get("w")[1] == doctest::Approx(-0.99).epsilon(1e-9));
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0, 100, 5e-4, 1e-7) == 5e-4);
  CHECK(cosine_lr(100, 100, 5e-4, 1e-7) == doctest::Approx(1e-7).epsilon(1e-12));
  CHECK(cosine_lr(50, 100, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cosine_lr(250, 100, 1.0, 0.25) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("scalar quadratic converges") {
  ParamStore<double> p;
  p.add("x", Tensor<double>(Shape{1}, 3.0));
  OptimState<double> s;
  s.hp.weight_decay = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    const double x = p.get("x")[0];
    adamw_step(p, {{"x", Tensor<double>(Shape{1}, 2 * x)}}, s, cosine_lr(t, 100, 0.2, 1e-4));
  }
  CHECK(std::abs(p.get("x")[0]) < 0.05);
}

}  // TEST_SUITE
