#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wavessm/autodiff.hpp"
#include "wavessm/params.hpp"
#include "wavessm/tensor.hpp"

namespace wavessm {

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradTolLinear = 1e-6;     // primitive ops
inline constexpr double kGradTolComposite = 1e-4;  // scans, attention, whole blocks
inline constexpr double kGradScaleFloor = 1e-3;

// One differentiated tensor of one op.
struct GradcheckResult {
  std::string op;
  std::string tensor;        // "input<k>" or a parameter name
  double error = 0;          // see gradcheck()
  double scale = 0;          // max(max|numeric|, max|analytic|) over the checked coordinates
  double tolerance = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;   // coordinates compared
  std::string note;          // set when the check could not be carried out

  bool passed() const { return note.empty() && error <= tolerance; }
};

// A scalar-free graph: the harness contracts its output with fixed random
// weights to get the loss.
using GraphFn = std::function<ad::Var<double>(const Scope<double>& params, const std::vector<ad::Var<double>>& inputs)>;

struct GradcheckProblem {
  ParamStore<double> params;
  std::vector<Tensor<double>> inputs;
  GraphFn fn;
};

struct GradcheckOptions {
  double step = kGradcheckStep;
  double tolerance = kGradTolLinear;
  std::size_t max_coords = 0;  // per tensor; 0 checks every coordinate
  bool guard_routing = false;  // reject points where an fmt argmin could flip
};

// Central differences against the tape. Returns one result per tensor, or a
// single result with a note when the point is unusable. Per tensor
//   error = max|analytic - numeric| / max(scale, 1e-3 * G)
// where G is the largest analytic gradient entry of the whole problem, so a
// tensor whose gradient sits at the round-off floor of the differences is
// judged against the problem's gradient magnitude instead of its own.
std::vector<GradcheckResult> gradcheck(const std::string& op, const GradcheckProblem& problem,
                                       const GradcheckOptions& options, std::uint64_t seed);

// Names of the built-in cases, covering every differentiable op and block.
std::vector<std::string> gradcheck_suite_ops();

// Runs "all" or a single named case; throws ConfigError for an unknown name.
std::vector<GradcheckResult> run_gradcheck_suite(const std::string& which, std::uint64_t seed = 0);

}  // namespace wavessm
