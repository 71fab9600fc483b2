#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wavessm/tensor.hpp"

namespace wavessm {

enum class ScanDirection;

namespace ad {

template <class T>
class Tape;

// A value flowing through a computation. Untracked vars (no tape) are plain
// constants; every op on them runs eagerly without recording anything.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value) : value_(std::make_shared<const Tensor<T>>(std::move(value))) {}

  const Tensor<T>& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  bool defined() const noexcept { return value_ != nullptr; }
  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape<T>* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }

 private:
  friend class Tape<T>;
  std::shared_ptr<const Tensor<T>> value_;
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <class T>
struct BackwardResult {
  std::map<std::string, Tensor<T>> grads;  // leaf name -> gradient
  std::vector<std::string> detached;       // trainable leaves the loss does not reach
};

// Records ops in creation order, which is already a topological order.
// Single-threaded; one tape per graph.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, std::string name);

  // Appends a node if any input is tracked; otherwise returns a constant.
  Var<T> record(Tensor<T> value, const char* op, const std::vector<Var<T>>& inputs, BackwardFn fn);

  // Called from backward closures.
  void accumulate(const Var<T>& v, const Tensor<T>& g);

  BackwardResult<T> backward(const Var<T>& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& op_name(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }

 private:
  struct Node {
    std::string op;
    std::string leaf_name;
    BackwardFn fn;
    Tensor<T> grad;
    bool has_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

// Finds the tape shared by the tracked inputs (nullptr if none are tracked).
template <class T>
Tape<T>* tape_of(const std::vector<Var<T>>& inputs);

// --- elementwise / structural ---------------------------------------------

template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& a, T s);
template <class T> Var<T> exp(const Var<T>& a);
template <class T> Var<T> activation(const Var<T>& x, Activation kind);
template <class T> Var<T> clamp(const Var<T>& x, T lo, T hi);
// x[..., C] * v[C]
template <class T> Var<T> mul_channels(const Var<T>& x, const Var<T>& v);
// x[..., C] + b[C]
template <class T> Var<T> add_bias(const Var<T>& x, const Var<T>& b);
// x / s[index] for a vector s.
template <class T> Var<T> div_by_element(const Var<T>& x, const Var<T>& s, std::size_t index);

template <class T> Var<T> reshape(const Var<T>& x, Shape shape);
template <class T> Var<T> transpose(const Var<T>& x);
template <class T> Var<T> slice_last(const Var<T>& x, std::size_t start, std::size_t count);
template <class T> Var<T> concat_last(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count);
template <class T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
// Channel gather with fixed indices: out[..., i] = x[..., index[i]].
template <class T> Var<T> gather_last(const Var<T>& x, const std::vector<std::size_t>& index);

// --- layers ----------------------------------------------------------------

template <class T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvSpec& spec);
template <class T> Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);
template <class T> Var<T> softmax(const Var<T>& x, std::size_t axis);
template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// Rows of a rank-2 tensor scaled to unit L2 norm (norm floored at eps).
template <class T> Var<T> l2_normalize_rows(const Var<T>& x, T eps);
// [H, W, C] -> [1, 1, C]
template <class T> Var<T> mean_spatial(const Var<T>& x);

// --- image geometry --------------------------------------------------------

// Pads at the bottom/right by reflection up to [H, W].
template <class T> Var<T> pad_reflect(const Var<T>& x, std::size_t height, std::size_t width);
// Keeps the top-left [H, W] window.
template <class T> Var<T> crop(const Var<T>& x, std::size_t height, std::size_t width);
// Bilinear resampling with half-pixel centres (align_corners = false).
template <class T> Var<T> resize_bilinear(const Var<T>& x, std::size_t height, std::size_t width);

// --- wavelet / scan --------------------------------------------------------

template <class T> Var<T> dwt2(const Var<T>& x);  // [H,W,C] -> [H/2,W/2,4C]
template <class T> Var<T> iwt2(const Var<T>& x);  // [H/2,W/2,4C] -> [H,W,C]
template <class T> Var<T> unfold(const Var<T>& x, ScanDirection d);
template <class T> Var<T> fold(const Var<T>& seq, ScanDirection d, std::size_t height, std::size_t width);

// Forward uses the chunked parallel scan, backward the sequential recurrence.
template <class T>
Var<T> selective_scan(const Var<T>& u, const Var<T>& delta, const Var<T>& A, const Var<T>& B,
                      const Var<T>& C, const Var<T>& Dskip);

// --- losses ----------------------------------------------------------------

template <class T> Var<T> sum(const Var<T>& x);
// sum(x * weights) for a fixed tensor of weights.
template <class T> Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);
// Mean absolute error, subgradient sign(0) = 0.
template <class T> Var<T> l1_loss(const Var<T>& pred, const Var<T>& target);

}  // namespace ad
}  // namespace wavessm
