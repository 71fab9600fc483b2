#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "wavessm/error.hpp"

namespace wavessm {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array. Images are [H, W, C] (channels last), sequences are
// [L, D], weights use whatever layout their kernel documents.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 / rank-3 element access (no bounds checks beyond debug asserts).
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  Tensor reshaped(Shape shape) const;

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T v);
  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

enum class Activation { kSiLU, kGELU, kSigmoid, kSoftplus };

const char* activation_name(Activation kind);

// Stride 1, "same" output size with reflect padding. groups == 1 is a dense
// convolution, groups == Cin a depth-wise one.
// Weight layout: [K, K, Cin / groups, Cout]. Bias: [Cout] or empty.
struct ConvSpec {
  std::size_t kernel_size = 1;
  std::size_t groups = 1;
};

// Reflects an out-of-range index back into [0, n) without repeating the edge
// sample (..., 2, 1, | 0, 1, 2, ..., n-1 | n-2, ...).
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

template <class T>
void check_finite(const Tensor<T>& t, const char* what);

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what);

// --- elementwise -----------------------------------------------------------

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T s);
template <class T> void add_inplace(Tensor<T>& acc, const Tensor<T>& b);

// x[..., C] * v[C]
template <class T> Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& v);

template <class T> T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);
template <class T> T sum(const Tensor<T>& a);

// --- convolution -----------------------------------------------------------

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec);

template <class T>
struct ConvGrads {
  Tensor<T> dx, dw, db;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                             const ConvSpec& spec, const Tensor<T>& dy);

// --- normalisation ---------------------------------------------------------

// Normalises over the last axis: (x - mean) / sqrt(var + eps) * gamma + beta.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

template <class T>
struct LayerNormGrads {
  Tensor<T> dx, dgamma, dbeta;
};

template <class T>
LayerNormGrads<T> layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, T eps,
                                      const Tensor<T>& dy);

// --- activations -----------------------------------------------------------

template <class T> T activate(T x, Activation kind);
template <class T> T activate_derivative(T x, Activation kind);

template <class T> Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <class T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& dy, Activation kind);

// --- softmax / matmul ------------------------------------------------------

template <class T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
template <class T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy, std::size_t axis);

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> transpose(const Tensor<T>& a);

}  // namespace wavessm
