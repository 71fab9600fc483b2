#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wavessm/autodiff.hpp"
#include "wavessm/params.hpp"
#include "wavessm/tensor.hpp"

namespace wavessm {

inline constexpr std::size_t kLevels = 3;
inline constexpr std::size_t kPadMultiple = 8;  // 2^kLevels

struct ModelConfig {
  std::size_t channels = 32;
  // Block counts per level (level 1 first). The decoder refines each level
  // with the same number of blocks as the encoder.
  std::vector<std::size_t> lfss_counts{1, 2, 4};
  std::vector<std::size_t> hfe_counts{1, 1, 1};
  std::size_t heads = 8;
  std::size_t lambda = 2;
  std::size_t state_size = 16;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError

  // The small configuration used by the overfit trainer.
  static ModelConfig toy();
};

struct Model {
  ModelConfig config;
  ParamStore<float> params;

  std::size_t param_count() const { return params.numel(); }
  Tensor<float> forward(const Tensor<float>& img) const;
};

// Deterministic construction: the same config and seed give bit-identical weights.
Model build(const ModelConfig& cfg);

template <class T>
void init_model(ParamInit<T> init, const ModelConfig& cfg);

// The differentiable network on an [H,W,3] image. Any H, W >= 1; the image is
// reflect-padded to a multiple of 8 and the result is cropped back.
template <class T>
ad::Var<T> forward_graph(const ModelConfig& cfg, const Scope<T>& w, const ad::Var<T>& img, bool clamp_output);

// Inference with constant weights; output clamped to [0,1].
template <class T>
Tensor<T> forward(const ModelConfig& cfg, const ParamStore<T>& params, const Tensor<T>& img);

// FNV-1a over names, shapes and raw bytes, in declaration order.
std::uint64_t checksum(const ParamStore<float>& params);

// Checkpoint container: "WMCK", u32 LE version, u64 LE manifest length, JSON
// manifest {name: {dtype, shape, offset, byte_len}}, raw LE float32 payload.
// The model config travels under the reserved "__metadata__" key.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save(const Model& m, const std::string& path);
Model load(const std::string& path);

}  // namespace wavessm
