#include "wavessm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wavessm/hfe.hpp"
#include "wavessm/lfss.hpp"
#include "wavessm/network.hpp"
#include "wavessm/scan2d.hpp"

namespace wavessm {

namespace {

using V = ad::Var<double>;
using Inputs = std::vector<V>;

Tensor<double> evaluate(const GradcheckProblem& p, const ParamStore<double>& params,
                        const std::vector<Tensor<double>>& inputs) {
  ParamBinder<double> binder(params, nullptr);
  Inputs in;
  for (const auto& t : inputs) in.emplace_back(t);
  return p.fn(Scope<double>(binder, ""), in).value();
}

double contract(const Tensor<double>& out, const Tensor<double>& weights) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t max_coords, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_coords == 0 || n <= max_coords) return idx;
  for (std::size_t i = 0; i < max_coords; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_coords);
  std::sort(idx.begin(), idx.end());
  return idx;
}

GradcheckResult unusable(const std::string& op, const std::string& note, double tol) {
  GradcheckResult r;
  r.op = op;
  r.tensor = "-";
  r.tolerance = tol;
  r.note = note;
  return r;
}

}  // namespace

std::vector<GradcheckResult> gradcheck(const std::string& op, const GradcheckProblem& problem,
                                       const GradcheckOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  const double h = options.step;

  Tensor<double> base;
  std::uint64_t signature = 0;
  {
    FmtRoutingProbe probe;
    base = evaluate(problem, problem.params, problem.inputs);
    signature = probe.signature();
    if (options.guard_routing && probe.min_margin() <= 10 * h)
      return {unusable(op, "fmt routing margin " + std::to_string(probe.min_margin()) + " <= 10h", options.tolerance)};
  }
  Tensor<double> weights(base.shape());
  for (auto& w : weights.data()) w = rng.uniform(-1.0, 1.0);

  ad::Tape<double> tape;
  ParamBinder<double> binder(problem.params, &tape);
  Inputs leaves;
  for (std::size_t k = 0; k < problem.inputs.size(); ++k)
    leaves.push_back(tape.leaf(problem.inputs[k], "input" + std::to_string(k)));
  const auto loss = ad::weighted_sum(problem.fn(Scope<double>(binder, ""), leaves), weights);
  const auto analytic = tape.backward(loss);

  double global_scale = 0;
  for (const auto& [name, g] : analytic.grads)
    for (double v : g.data()) global_scale = std::max(global_scale, std::abs(v));
  const double floor = std::max(kGradScaleFloor * global_scale, 1e-12);

  ParamStore<double> params = problem.params;
  std::vector<Tensor<double>> inputs = problem.inputs;
  std::vector<GradcheckResult> results;

  auto check_tensor = [&](const std::string& name, Tensor<double>& slot) -> bool {
    const auto it = analytic.grads.find(name);
    const Tensor<double> grad = it != analytic.grads.end() ? it->second : Tensor<double>(slot.shape());
    GradcheckResult r;
    r.op = op;
    r.tensor = name;
    r.tolerance = options.tolerance;
    double max_diff = 0, max_num = 0, max_ana = 0;
    for (std::size_t i : pick_coords(slot.size(), options.max_coords, rng)) {
      const double orig = slot[i];
      double f[2];
      for (int s = 0; s < 2; ++s) {
        slot[i] = orig + (s == 0 ? h : -h);
        FmtRoutingProbe probe;
        f[s] = contract(evaluate(problem, params, inputs), weights);
        if (options.guard_routing && probe.signature() != signature) {
          slot[i] = orig;
          results.push_back(unusable(op, "fmt routing flipped while perturbing " + name, options.tolerance));
          return false;
        }
      }
      slot[i] = orig;
      const double numeric = (f[0] - f[1]) / (2 * h);
      const double diff = std::abs(numeric - grad[i]);
      if (diff > max_diff) {
        max_diff = diff;
        r.worst_index = i;
      }
      max_num = std::max(max_num, std::abs(numeric));
      max_ana = std::max(max_ana, std::abs(grad[i]));
      ++r.checked;
    }
    r.scale = std::max(max_num, max_ana);
    r.error = max_diff / std::max(r.scale, floor);
    results.push_back(r);
    return true;
  };

  for (std::size_t k = 0; k < inputs.size(); ++k)
    if (!check_tensor("input" + std::to_string(k), inputs[k])) return {results.back()};
  for (const auto& name : problem.params.names())
    if (!check_tensor(name, params.get_mut(name))) return {results.back()};
  return results;
}

// --- suite -------------------------------------------------------------------

namespace {

Tensor<double> rand(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values at least `gap` away from every kink in `kinks`.
Tensor<double> rand_away(Rng& rng, Shape shape, double lo, double hi, std::vector<double> kinks, double gap) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) {
    do v = rng.uniform(lo, hi);
    while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(v - k) < gap; }));
  }
  return t;
}

struct Case {
  std::string name;
  double tolerance;
  std::size_t max_coords;
  bool guard_routing;
  std::function<GradcheckProblem(Rng&)> make;
};

GradcheckProblem plain(std::vector<Tensor<double>> inputs, std::function<V(const Inputs&)> f) {
  return {ParamStore<double>{}, std::move(inputs), [f](const Scope<double>&, const Inputs& in) { return f(in); }};
}

template <class Init>
GradcheckProblem with_params(Rng& rng, Init init, std::vector<Tensor<double>> inputs, GraphFn f) {
  GradcheckProblem p{ParamStore<double>{}, std::move(inputs), std::move(f)};
  init(ParamInit<double>(p.params, rng));
  // Perturb deterministic initialisers (ones, zeros) so every path carries signal.
  for (const auto& name : p.params.names())
    for (auto& v : p.params.get_mut(name).data()) v += rng.uniform(-0.2, 0.2);
  return p;
}

V conv_with(const Inputs& in, std::size_t kernel, std::size_t groups) {
  return ad::conv2d(in[0], in[1], in.size() > 2 ? in[2] : V{}, ConvSpec{kernel, groups});
}

std::vector<Case> build_suite() {
  const double lin = kGradTolLinear, comp = kGradTolComposite;
  std::vector<Case> cs;
  auto unary = [&](const std::string& name, Shape shape, double lo, double hi, std::function<V(const V&)> f) {
    cs.push_back({name, lin, 0, false, [=](Rng& r) {
                    return plain({rand(r, shape, lo, hi)}, [f](const Inputs& in) { return f(in[0]); });
                  }});
  };
  auto binary = [&](const std::string& name, Shape sa, Shape sb, std::function<V(const V&, const V&)> f,
                    double lo_b = -1.0, double hi_b = 1.0) {
    cs.push_back({name, lin, 0, false, [=](Rng& r) {
                    return plain({rand(r, sa), rand(r, sb, lo_b, hi_b)},
                                 [f](const Inputs& in) { return f(in[0], in[1]); });
                  }});
  };

  binary("add", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return ad::add(a, b); });
  binary("sub", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return ad::sub(a, b); });
  binary("mul", {2, 3, 4}, {2, 3, 4}, [](const V& a, const V& b) { return ad::mul(a, b); });
  unary("scale", {3, 4}, -1, 1, [](const V& x) { return ad::scale(x, 1.7); });
  unary("exp", {3, 4}, -2, 2, [](const V& x) { return ad::exp(x); });
  unary("silu", {3, 4}, -3, 3, [](const V& x) { return ad::activation(x, Activation::kSiLU); });
  unary("gelu", {3, 4}, -3, 3, [](const V& x) { return ad::activation(x, Activation::kGELU); });
  unary("sigmoid", {3, 4}, -3, 3, [](const V& x) { return ad::activation(x, Activation::kSigmoid); });
  unary("softplus", {3, 4}, -3, 3, [](const V& x) { return ad::activation(x, Activation::kSoftplus); });
  cs.push_back({"clamp", lin, 0, false, [](Rng& r) {
                  return plain({rand_away(r, {4, 5}, -1, 1, {-0.5, 0.5}, 1e-3)},
                               [](const Inputs& in) { return ad::clamp(in[0], -0.5, 0.5); });
                }});
  binary("mul_channels", {2, 3, 4}, {4}, [](const V& x, const V& v) { return ad::mul_channels(x, v); });
  binary("add_bias", {5, 4}, {4}, [](const V& x, const V& b) { return ad::add_bias(x, b); });
  binary("div_by_element", {3, 3}, {2}, [](const V& x, const V& s) { return ad::div_by_element(x, s, 1); }, 0.5, 2.0);
  unary("reshape", {2, 6}, -1, 1, [](const V& x) { return ad::reshape(x, Shape{3, 4}); });
  unary("transpose", {3, 5}, -1, 1, [](const V& x) { return ad::transpose(x); });
  unary("slice_last", {2, 3, 5}, -1, 1, [](const V& x) { return ad::slice_last(x, 1, 3); });
  binary("concat_last", {2, 3, 2}, {2, 3, 3}, [](const V& a, const V& b) { return ad::concat_last<double>({a, b, a}); });
  unary("slice_rows", {5, 3}, -1, 1, [](const V& x) { return ad::slice_rows(x, 1, 3); });
  binary("concat_rows", {2, 3}, {4, 3}, [](const V& a, const V& b) { return ad::concat_rows<double>({b, a}); });
  unary("gather_last", {2, 3, 4}, -1, 1, [](const V& x) { return ad::gather_last(x, {2, 0, 2, 1, 3}); });

  cs.push_back({"conv2d_dense3x3", lin, 0, false, [](Rng& r) {
                  return plain({rand(r, {5, 6, 3}), rand(r, {3, 3, 3, 4}), rand(r, {4})},
                               [](const Inputs& in) { return conv_with(in, 3, 1); });
                }});
  cs.push_back({"conv2d_depthwise3x3", lin, 0, false, [](Rng& r) {
                  return plain({rand(r, {5, 4, 4}), rand(r, {3, 3, 1, 4}), rand(r, {4})},
                               [](const Inputs& in) { return conv_with(in, 3, 4); });
                }});
  cs.push_back({"conv2d_pointwise", lin, 0, false, [](Rng& r) {
                  return plain({rand(r, {4, 3, 3}), rand(r, {1, 1, 3, 5})},
                               [](const Inputs& in) { return conv_with(in, 1, 1); });
                }});
  cs.push_back({"layer_norm", lin, 0, false, [](Rng& r) {
                  return plain({rand(r, {3, 4, 6}), rand(r, {6}, 0.5, 1.5), rand(r, {6})}, [](const Inputs& in) {
                    return ad::layer_norm(in[0], in[1], in[2], kLayerNormEps);
                  });
                }});
  unary("softmax_rows", {4, 5}, -2, 2, [](const V& x) { return ad::softmax(x, 1); });
  unary("softmax_cols", {4, 5}, -2, 2, [](const V& x) { return ad::softmax(x, 0); });
  binary("matmul", {3, 4}, {4, 5}, [](const V& a, const V& b) { return ad::matmul(a, b); });
  unary("l2_normalize_rows", {3, 6}, -1, 1, [](const V& x) { return ad::l2_normalize_rows(x, kAttentionNormEps); });
  unary("mean_spatial", {3, 4, 5}, -1, 1, [](const V& x) { return ad::mean_spatial(x); });
  unary("pad_reflect", {5, 6, 2}, -1, 1, [](const V& x) { return ad::pad_reflect(x, 8, 8); });
  unary("crop", {6, 6, 2}, -1, 1, [](const V& x) { return ad::crop(x, 4, 5); });
  unary("resize_bilinear_down", {8, 8, 2}, -1, 1, [](const V& x) { return ad::resize_bilinear(x, 4, 4); });
  unary("resize_bilinear_up", {3, 5, 2}, -1, 1, [](const V& x) { return ad::resize_bilinear(x, 6, 7); });
  unary("dwt2", {4, 6, 2}, -1, 1, [](const V& x) { return ad::dwt2(x); });
  unary("iwt2", {2, 3, 8}, -1, 1, [](const V& x) { return ad::iwt2(x); });
  unary("unfold", {3, 4, 2}, -1, 1, [](const V& x) {
    V y;
    for (auto d : kScanDirections) y = y.defined() ? ad::add(y, ad::unfold(x, d)) : ad::unfold(x, d);
    return y;
  });
  unary("fold", {12, 2}, -1, 1, [](const V& x) {
    V y;
    for (auto d : kScanDirections) y = y.defined() ? ad::add(y, ad::fold(x, d, 3, 4)) : ad::fold(x, d, 3, 4);
    return y;
  });
  unary("sum", {3, 4}, -1, 1, [](const V& x) { return ad::sum(x); });
  cs.push_back({"l1_loss", lin, 0, false, [](Rng& r) {
                  auto target = rand(r, {3, 4});
                  auto pred = target;
                  for (auto& v : pred.data()) v += (r.uniform() < 0.5 ? -1 : 1) * r.uniform(0.01, 0.5);
                  return plain({pred, target}, [](const Inputs& in) { return ad::l1_loss(in[0], in[1]); });
                }});

  cs.push_back({"selective_scan", comp, 0, false, [](Rng& r) {
                  const std::size_t L = 7, D = 3, N = 4;
                  return plain({rand(r, {L, D}), rand(r, {L, D}, 0.1, 1.0), rand(r, {D, N}, -2.0, -0.2), rand(r, {L, N}),
                                rand(r, {L, N}), rand(r, {D})},
                               [](const Inputs& in) {
                                 return ad::selective_scan(in[0], in[1], in[2], in[3], in[4], in[5]);
                               });
                }});

  // Blocks with weights.
  auto block = [&](const std::string& name, std::size_t max_coords, bool guard,
                   std::function<GradcheckProblem(Rng&)> make) { cs.push_back({name, comp, max_coords, guard, make}); };
  block("ssm2d", 12, false, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_ssm2d(i, 3, 4); }, {rand(r, {3, 4, 3})},
                       [](const Scope<double>& w, const Inputs& in) { return ssm2d(in[0], w); });
  });
  block("vssm", 8, false, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_vssm(i, 4, 2, 4); }, {rand(r, {3, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return vssm(in[0], w); });
  });
  block("gffn", 12, false, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_gffn(i, 4); }, {rand(r, {3, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return gffn(in[0], w); });
  });
  block("lfss_block", 6, false, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_lfss_block(i, 4, 2, 4); }, {rand(r, {4, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return lfss_block(in[0], w); });
  });
  block("fmt", 12, true, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_fmt(i, 3); }, {rand(r, {4, 4, 3}), rand(r, {4, 4, 3})},
                       [](const Scope<double>& w, const Inputs& in) { return fmt(in[0], in[1], w); });
  });
  block("fmta", 8, true, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_fmta(i, 4, 2); }, {rand(r, {4, 4, 4}), rand(r, {4, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return fmta(in[0], in[1], w); });
  });
  block("fcfn", 8, true, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_fcfn(i, 4); }, {rand(r, {4, 4, 4}), rand(r, {4, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return fcfn(in[0], in[1], w); });
  });
  block("hfe_block", 6, true, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_hfe_block(i, 4, 2); },
                       {rand(r, {4, 4, 4}), rand(r, {4, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return hfe_block(in[0], in[1], w); });
  });
  block("skff", 12, false, [](Rng& r) {
    return with_params(r, [](ParamInit<double> i) { init_skff(i, 4); },
                       {rand(r, {3, 4, 4}), rand(r, {3, 4, 4}), rand(r, {3, 4, 4})},
                       [](const Scope<double>& w, const Inputs& in) { return skff(in[0], in[1], in[2], w); });
  });
  block("network", 3, true, [](Rng& r) {
    ModelConfig cfg = ModelConfig::toy();
    cfg.channels = 4;
    cfg.state_size = 4;
    return with_params(r, [cfg](ParamInit<double> i) { init_model(i, cfg); }, {rand(r, {6, 7, 3}, 0.0, 1.0)},
                       [cfg](const Scope<double>& w, const Inputs& in) { return forward_graph(cfg, w, in[0], false); });
  });
  return cs;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ULL;
  return h;
}

}  // namespace

std::vector<std::string> gradcheck_suite_ops() {
  std::vector<std::string> names;
  for (const auto& c : build_suite()) names.push_back(c.name);
  return names;
}

std::vector<GradcheckResult> run_gradcheck_suite(const std::string& which, std::uint64_t seed) {
  const auto suite = build_suite();
  std::vector<GradcheckResult> out;
  bool found = false;
  for (const auto& c : suite) {
    if (which != "all" && which != c.name) continue;
    found = true;
    constexpr int kAttempts = 5;
    std::vector<GradcheckResult> results;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      Rng rng(seed * 7919 + name_hash(c.name) + static_cast<std::uint64_t>(attempt));
      const GradcheckProblem problem = c.make(rng);
      GradcheckOptions opt;
      opt.tolerance = c.tolerance;
      opt.max_coords = c.max_coords;
      opt.guard_routing = c.guard_routing;
      results = gradcheck(c.name, problem, opt, rng.next_u64());
      const bool unstable = results.size() == 1 && !results[0].note.empty();
      if (!unstable) break;
    }
    out.insert(out.end(), results.begin(), results.end());
  }
  if (!found) {
    std::string known;
    for (const auto& c : suite) known += (known.empty() ? "" : ", ") + c.name;
    throw ConfigError("gradcheck: unknown op '" + which + "' (known: all, " + known + ")");
  }
  return out;
}

}  // namespace wavessm
