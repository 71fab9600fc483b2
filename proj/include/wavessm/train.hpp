#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wavessm/network.hpp"
#include "wavessm/optim.hpp"

namespace wavessm {

struct ToyTrainConfig {
  ModelConfig model = ModelConfig::toy();
  std::size_t steps = 200;
  std::size_t crop = 64;  // centre crop side; the whole image if smaller
  double lr_max = 2e-3;
  double lr_min = 1e-5;
  double weight_decay = 0.0;
};

struct ToyTrainResult {
  Model model;
  double initial_l1 = 0;     // before the first update
  double final_l1 = 0;       // after the last update
  std::vector<double> losses;  // per step, before its update
};

// Overfits one low/normal pair with L1 loss, AdamW and a cosine schedule.
// progress(step, loss) is called after each step when set.
ToyTrainResult train_toy(const Tensor<float>& low, const Tensor<float>& normal, const ToyTrainConfig& cfg,
                         const std::function<void(std::size_t, double)>& progress = {});

// Centre crop of an [H,W,C] image to at most side x side.
Tensor<float> center_crop(const Tensor<float>& img, std::size_t side);

}  // namespace wavessm
