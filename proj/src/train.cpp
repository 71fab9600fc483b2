#include "wavessm/train.hpp"

#include <algorithm>
#include <cmath>

namespace wavessm {

Tensor<float> center_crop(const Tensor<float>& img, std::size_t side) {
  if (img.rank() != 3) throw ShapeError("center_crop: expected [H,W,C], got " + shape_str(img.shape()));
  const std::size_t h = std::min(img.dim(0), side), w = std::min(img.dim(1), side), c = img.dim(2);
  const std::size_t y0 = (img.dim(0) - h) / 2, x0 = (img.dim(1) - w) / 2;
  Tensor<float> out(Shape{h, w, c});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out.at(y, x, k) = img.at(y0 + y, x0 + x, k);
  return out;
}

namespace {

double l1_at(const Model& m, const ad::Var<float>& x, const ad::Var<float>& target) {
  ParamBinder<float> binder(m.params, nullptr);
  return ad::l1_loss(forward_graph(m.config, Scope<float>(binder, ""), x, false), target).value()[0];
}

}  // namespace

ToyTrainResult train_toy(const Tensor<float>& low, const Tensor<float>& normal, const ToyTrainConfig& cfg,
                         const std::function<void(std::size_t, double)>& progress) {
  check_same_shape(low, normal, "train_toy");
  if (cfg.steps == 0) throw ConfigError("train_toy: steps must be positive");
  const ad::Var<float> x(center_crop(low, cfg.crop)), target(center_crop(normal, cfg.crop));

  ToyTrainResult result{build(cfg.model), 0, 0, {}};
  OptimState<float> state;
  state.hp.weight_decay = cfg.weight_decay;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ad::Tape<float> tape;
    ParamBinder<float> binder(result.model.params, &tape);
    const auto loss = ad::l1_loss(forward_graph(result.model.config, Scope<float>(binder, ""), x, false), target);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) throw NumericError("train_toy: loss became non-finite at step " + std::to_string(step));
    result.losses.push_back(value);
    auto grads = tape.backward(loss).grads;
    adamw_step(result.model.params, grads, state, cosine_lr(step, cfg.steps, cfg.lr_max, cfg.lr_min));
    if (progress) progress(step, value);
  }
  result.initial_l1 = result.losses.front();
  result.final_l1 = l1_at(result.model, x, target);
  return result;
}

}  // namespace wavessm
