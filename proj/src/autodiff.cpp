#include "wavessm/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "wavessm/scan2d.hpp"
#include "wavessm/ssm.hpp"
#include "wavessm/wavelet.hpp"

namespace wavessm::ad {

// --- tape ------------------------------------------------------------------

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value, std::string name) {
  Var<T> v(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<int>(nodes_.size());
  Node n;
  n.op = "leaf";
  n.leaf_name = std::move(name);
  n.is_leaf = true;
  n.grad = Tensor<T>(v.shape());
  nodes_.push_back(std::move(n));
  return v;
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, const char* op, const std::vector<Var<T>>& inputs, BackwardFn fn) {
  Var<T> v(std::move(value));
  bool any = false;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (in.tape() != this) throw Error(ErrorCode::kInternal, std::string(op) + ": inputs recorded on different tapes");
    any = true;
  }
  if (!any) return v;
  v.tape_ = this;
  v.id_ = static_cast<int>(nodes_.size());
  Node n;
  n.op = op;
  n.fn = std::move(fn);
  nodes_.push_back(std::move(n));
  return v;
}

template <class T>
void Tape<T>::accumulate(const Var<T>& v, const Tensor<T>& g) {
  if (!v.tracked()) return;
  Node& n = nodes_.at(static_cast<std::size_t>(v.id()));
  if (g.shape() != v.shape())
    throw Error(ErrorCode::kInternal, "backward of '" + n.op + "' produced gradient " + shape_str(g.shape()) +
                                          " for a value of shape " + shape_str(v.shape()));
  if (n.has_grad) {
    add_inplace(n.grad, g);
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

template <class T>
BackwardResult<T> Tape<T>::backward(const Var<T>& loss) {
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  BackwardResult<T> result;
  if (loss.tracked()) {
    if (loss.tape() != this) throw Error(ErrorCode::kInternal, "backward: loss belongs to another tape");
    accumulate(loss, Tensor<T>(loss.shape(), T{1}));
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.has_grad || n.is_leaf || !n.fn) continue;
      n.fn(n.grad);
      n.grad = Tensor<T>();  // interior gradients are not needed again
    }
  }
  for (auto& n : nodes_) {
    if (!n.is_leaf) continue;
    if (!n.has_grad) result.detached.push_back(n.leaf_name);
    result.grads[n.leaf_name] = n.grad;
  }
  return result;
}

template <class T>
Tape<T>* tape_of(const std::vector<Var<T>>& inputs) {
  for (const auto& v : inputs)
    if (v.tracked()) return v.tape();
  return nullptr;
}

namespace {

// Upstream gradient broadcast into a fresh tensor of the given shape.
template <class T>
Tensor<T> zeros_like(const Var<T>& v) {
  return Tensor<T>(v.shape());
}

}  // namespace

// --- elementwise / structural ---------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto out = wavessm::add(a.value(), b.value());
  auto* tape = tape_of<T>({a, b});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "add", {a, b}, [tape, a, b](const Tensor<T>& g) {
    tape->accumulate(a, g);
    tape->accumulate(b, g);
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto out = wavessm::sub(a.value(), b.value());
  auto* tape = tape_of<T>({a, b});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "sub", {a, b}, [tape, a, b](const Tensor<T>& g) {
    tape->accumulate(a, g);
    tape->accumulate(b, wavessm::scale(g, T{-1}));
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto out = wavessm::mul(a.value(), b.value());
  auto* tape = tape_of<T>({a, b});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "mul", {a, b}, [tape, a, b](const Tensor<T>& g) {
    if (a.tracked()) tape->accumulate(a, wavessm::mul(g, b.value()));
    if (b.tracked()) tape->accumulate(b, wavessm::mul(g, a.value()));
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  auto out = wavessm::scale(a.value(), s);
  auto* tape = tape_of<T>({a});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "scale", {a},
                      [tape, a, s](const Tensor<T>& g) { tape->accumulate(a, wavessm::scale(g, s)); });
}

template <class T>
Var<T> exp(const Var<T>& a) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
  auto* tape = tape_of<T>({a});
  if (!tape) return Var<T>(std::move(out));
  auto y = std::make_shared<const Tensor<T>>(out);
  return tape->record(std::move(out), "exp", {a},
                      [tape, a, y](const Tensor<T>& g) { tape->accumulate(a, wavessm::mul(g, *y)); });
}

template <class T>
Var<T> activation(const Var<T>& x, Activation kind) {
  auto out = wavessm::activation(x.value(), kind);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), activation_name(kind), {x}, [tape, x, kind](const Tensor<T>& g) {
    tape->accumulate(x, activation_backward(x.value(), g, kind));
  });
}

template <class T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x.value()[i], lo, hi);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "clamp", {x}, [tape, x, lo, hi](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T v = x.value()[i];
      dx[i] = (v >= lo && v <= hi) ? g[i] : T{0};
    }
    tape->accumulate(x, dx);
  });
}

template <class T>
Var<T> mul_channels(const Var<T>& x, const Var<T>& v) {
  auto out = wavessm::mul_channels(x.value(), v.value());
  auto* tape = tape_of<T>({x, v});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "mul_channels", {x, v}, [tape, x, v](const Tensor<T>& g) {
    if (x.tracked()) tape->accumulate(x, wavessm::mul_channels(g, v.value()));
    if (v.tracked()) {
      const std::size_t c = v.value().size();
      Tensor<T> dv(v.shape());
      for (std::size_t i = 0; i < g.size(); ++i) dv[i % c] += g[i] * x.value()[i];
      tape->accumulate(v, dv);
    }
  });
}

template <class T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  const std::size_t c = x.shape().back();
  if (b.value().size() != c)
    throw ShapeError("add_bias: channel axis has " + std::to_string(c) + " but bias has " +
                     std::to_string(b.value().size()));
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i % c];
  auto* tape = tape_of<T>({x, b});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "add_bias", {x, b}, [tape, x, b, c](const Tensor<T>& g) {
    tape->accumulate(x, g);
    if (b.tracked()) {
      Tensor<T> db(b.shape());
      for (std::size_t i = 0; i < g.size(); ++i) db[i % c] += g[i];
      tape->accumulate(b, db);
    }
  });
}

template <class T>
Var<T> div_by_element(const Var<T>& x, const Var<T>& s, std::size_t index) {
  if (index >= s.value().size()) throw ShapeError("div_by_element: index out of range");
  const T d = s.value()[index];
  Tensor<T> out = wavessm::scale(x.value(), T{1} / d);
  auto* tape = tape_of<T>({x, s});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "div_by_element", {x, s}, [tape, x, s, index, d](const Tensor<T>& g) {
    if (x.tracked()) tape->accumulate(x, wavessm::scale(g, T{1} / d));
    if (s.tracked()) {
      Tensor<T> ds(s.shape());
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
      ds[index] = -acc / (d * d);
      tape->accumulate(s, ds);
    }
  });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  auto out = x.value().reshaped(std::move(shape));
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "reshape", {x},
                      [tape, x](const Tensor<T>& g) { tape->accumulate(x, g.reshaped(x.shape())); });
}

template <class T>
Var<T> transpose(const Var<T>& x) {
  auto out = wavessm::transpose(x.value());
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "transpose", {x},
                      [tape, x](const Tensor<T>& g) { tape->accumulate(x, wavessm::transpose(g)); });
}

template <class T>
Var<T> slice_last(const Var<T>& x, std::size_t start, std::size_t count) {
  const std::size_t c = x.shape().back();
  if (count == 0 || start + count > c)
    throw ShapeError("slice_last: range [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") exceeds channel axis of size " + std::to_string(c));
  Shape shape = x.shape();
  shape.back() = count;
  Tensor<T> out(shape);
  const std::size_t rows = x.value().size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < count; ++j) out[r * count + j] = x.value()[r * c + start + j];
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "slice_last", {x}, [tape, x, start, count, c, rows](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) dx[r * c + start + j] = g[r * count + j];
    tape->accumulate(x, dx);
  });
}

template <class T>
Var<T> concat_last(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Shape base = parts[0].shape();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != base.size() || !std::equal(s.begin(), s.end() - 1, base.begin()))
      throw ShapeError("concat_last: leading axes differ (" + shape_str(s) + " vs " + shape_str(base) + ")");
    widths.push_back(s.back());
    total += s.back();
  }
  Shape shape = base;
  shape.back() = total;
  Tensor<T> out(shape);
  const std::size_t rows = out.size() / total;
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j) out[r * total + off + j] = v[r * widths[k] + j];
    off += widths[k];
  }
  auto* tape = tape_of<T>(parts);
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "concat_last", parts, [tape, parts, widths, total, rows](const Tensor<T>& g) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (parts[k].tracked()) {
        Tensor<T> d(parts[k].shape());
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j) d[r * widths[k] + j] = g[r * total + off + j];
        tape->accumulate(parts[k], d);
      }
      off += widths[k];
    }
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count) {
  const std::size_t n = x.shape().front();
  if (count == 0 || start + count > n)
    throw ShapeError("slice_rows: range exceeds leading axis of size " + std::to_string(n));
  const std::size_t row = x.value().size() / n;
  Shape shape = x.shape();
  shape.front() = count;
  std::vector<T> data(x.value().vec().begin() + static_cast<std::ptrdiff_t>(start * row),
                      x.value().vec().begin() + static_cast<std::ptrdiff_t>((start + count) * row));
  Tensor<T> out(shape, std::move(data));
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "slice_rows", {x}, [tape, x, start, row](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    std::copy(g.data().begin(), g.data().end(), dx.data().begin() + static_cast<std::ptrdiff_t>(start * row));
    tape->accumulate(x, dx);
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape shape = parts[0].shape();
  shape.front() = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    if (!std::equal(p.shape().begin() + 1, p.shape().end(), parts[0].shape().begin() + 1) ||
        p.shape().size() != parts[0].shape().size())
      throw ShapeError("concat_rows: trailing axes differ");
    shape.front() += p.shape().front();
    data.insert(data.end(), p.value().vec().begin(), p.value().vec().end());
  }
  Tensor<T> out(shape, std::move(data));
  auto* tape = tape_of<T>(parts);
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "concat_rows", parts, [tape, parts](const Tensor<T>& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.value().size();
      if (p.tracked()) {
        std::vector<T> d(g.vec().begin() + static_cast<std::ptrdiff_t>(off),
                         g.vec().begin() + static_cast<std::ptrdiff_t>(off + n));
        tape->accumulate(p, Tensor<T>(p.shape(), std::move(d)));
      }
      off += n;
    }
  });
}

template <class T>
Var<T> gather_last(const Var<T>& x, const std::vector<std::size_t>& index) {
  const std::size_t c = x.shape().back();
  for (auto i : index)
    if (i >= c) throw ShapeError("gather_last: index " + std::to_string(i) + " out of range " + std::to_string(c));
  Shape shape = x.shape();
  shape.back() = index.size();
  Tensor<T> out(shape);
  const std::size_t rows = x.value().size() / c, k = index.size();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = x.value()[r * c + index[j]];
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "gather_last", {x}, [tape, x, index, rows, c, k](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < k; ++j) dx[r * c + index[j]] += g[r * k + j];
    tape->accumulate(x, dx);
  });
}

// --- layers ----------------------------------------------------------------

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvSpec& spec) {
  const bool has_bias = b.defined();
  auto out = wavessm::conv2d(x.value(), w.value(), has_bias ? b.value() : Tensor<T>(), spec);
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  auto* tape = tape_of<T>(inputs);
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), spec.groups == 1 ? "conv2d" : "conv2d_grouped", inputs,
                      [tape, x, w, b, has_bias, spec](const Tensor<T>& g) {
                        auto gr = conv2d_backward(x.value(), w.value(), has_bias, spec, g);
                        tape->accumulate(x, gr.dx);
                        tape->accumulate(w, gr.dw);
                        if (has_bias) tape->accumulate(b, gr.db);
                      });
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  auto out = wavessm::layer_norm(x.value(), gamma.value(), beta.value(), eps);
  auto* tape = tape_of<T>({x, gamma, beta});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "layer_norm", {x, gamma, beta}, [tape, x, gamma, beta, eps](const Tensor<T>& g) {
    auto gr = layer_norm_backward(x.value(), gamma.value(), eps, g);
    tape->accumulate(x, gr.dx);
    tape->accumulate(gamma, gr.dgamma.reshaped(gamma.shape()));
    tape->accumulate(beta, gr.dbeta.reshaped(beta.shape()));
  });
}

template <class T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  auto out = wavessm::softmax(x.value(), axis);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  auto y = std::make_shared<const Tensor<T>>(out);
  return tape->record(std::move(out), "softmax", {x}, [tape, x, y, axis](const Tensor<T>& g) {
    tape->accumulate(x, softmax_backward(*y, g, axis));
  });
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  auto out = wavessm::matmul(a.value(), b.value());
  auto* tape = tape_of<T>({a, b});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "matmul", {a, b}, [tape, a, b](const Tensor<T>& g) {
    if (a.tracked()) tape->accumulate(a, wavessm::matmul(g, wavessm::transpose(b.value())));
    if (b.tracked()) tape->accumulate(b, wavessm::matmul(wavessm::transpose(a.value()), g));
  });
}

template <class T>
Var<T> l2_normalize_rows(const Var<T>& x, T eps) {
  if (x.shape().size() != 2) throw ShapeError("l2_normalize_rows: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor<T> out(x.shape());
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t j = 0; j < cols; ++j) s += x.value()[r * cols + j] * x.value()[r * cols + j];
    norms[r] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = x.value()[r * cols + j] / norms[r];
  }
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  auto y = std::make_shared<const Tensor<T>>(out);
  return tape->record(std::move(out), "l2_normalize_rows", {x}, [tape, x, y, norms, eps, rows, cols](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const bool floored = norms[r] <= eps;
      T dot = 0;
      if (!floored)
        for (std::size_t j = 0; j < cols; ++j) dot += (*y)[r * cols + j] * g[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        dx[r * cols + j] = (g[r * cols + j] - (floored ? T{0} : (*y)[r * cols + j] * dot)) / norms[r];
    }
    tape->accumulate(x, dx);
  });
}

template <class T>
Var<T> mean_spatial(const Var<T>& x) {
  if (x.shape().size() != 3) throw ShapeError("mean_spatial: expected [H,W,C], got " + shape_str(x.shape()));
  const std::size_t c = x.shape()[2], hw = x.shape()[0] * x.shape()[1];
  Tensor<T> out(Shape{1, 1, c});
  for (std::size_t i = 0; i < x.value().size(); ++i) out[i % c] += x.value()[i];
  for (std::size_t k = 0; k < c; ++k) out[k] /= static_cast<T>(hw);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "mean_spatial", {x}, [tape, x, c, hw](const Tensor<T>& g) {
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i % c] / static_cast<T>(hw);
    tape->accumulate(x, dx);
  });
}

// --- image geometry --------------------------------------------------------

namespace {

// out(i, j, :) = sum_k w_k * in(src_k): a fixed linear map described by a
// list of (out_pixel, in_pixel, weight) taps.
struct Tap {
  std::size_t out, in;
  double weight;
};

template <class T>
Tensor<T> apply_taps(const Tensor<T>& x, const Shape& out_shape, const std::vector<Tap>& taps) {
  Tensor<T> out(out_shape);
  const std::size_t c = x.shape()[2];
  for (const auto& t : taps)
    for (std::size_t k = 0; k < c; ++k) out[t.out * c + k] += static_cast<T>(t.weight) * x[t.in * c + k];
  return out;
}

template <class T>
Tensor<T> apply_taps_transposed(const Tensor<T>& g, const Shape& in_shape, const std::vector<Tap>& taps) {
  Tensor<T> dx(in_shape);
  const std::size_t c = in_shape[2];
  for (const auto& t : taps)
    for (std::size_t k = 0; k < c; ++k) dx[t.in * c + k] += static_cast<T>(t.weight) * g[t.out * c + k];
  return dx;
}

template <class T>
Var<T> linear_resample(const Var<T>& x, const Shape& out_shape, std::vector<Tap> taps, const char* op) {
  auto out = apply_taps(x.value(), out_shape, taps);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  auto shared = std::make_shared<const std::vector<Tap>>(std::move(taps));
  return tape->record(std::move(out), op, {x}, [tape, x, shared](const Tensor<T>& g) {
    tape->accumulate(x, apply_taps_transposed(g, x.shape(), *shared));
  });
}

void require_image(const Shape& s, const char* op) {
  if (s.size() != 3) throw ShapeError(std::string(op) + ": expected [H,W,C], got " + shape_str(s));
}

// 1-D bilinear taps with half-pixel centres: (dst index, src index, weight).
std::vector<std::tuple<std::size_t, std::size_t, double>> bilinear_taps_1d(std::size_t in, std::size_t out) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> taps;
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    taps.emplace_back(o, i0, 1.0 - frac);
    if (frac > 0) taps.emplace_back(o, i1, frac);
  }
  return taps;
}

}  // namespace

template <class T>
Var<T> pad_reflect(const Var<T>& x, std::size_t height, std::size_t width) {
  require_image(x.shape(), "pad_reflect");
  const std::size_t h = x.shape()[0], w = x.shape()[1];
  if (height < h || width < w) throw ShapeError("pad_reflect: target smaller than input");
  if (height == h && width == w) return x;
  std::vector<Tap> taps;
  taps.reserve(height * width);
  for (std::size_t i = 0; i < height; ++i) {
    const auto si = static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(h)));
    for (std::size_t j = 0; j < width; ++j) {
      const auto sj = static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(j), static_cast<std::ptrdiff_t>(w)));
      taps.push_back({i * width + j, si * w + sj, 1.0});
    }
  }
  return linear_resample(x, Shape{height, width, x.shape()[2]}, std::move(taps), "pad_reflect");
}

template <class T>
Var<T> crop(const Var<T>& x, std::size_t height, std::size_t width) {
  require_image(x.shape(), "crop");
  const std::size_t w = x.shape()[1];
  if (height > x.shape()[0] || width > w) throw ShapeError("crop: window larger than input");
  if (height == x.shape()[0] && width == w) return x;
  std::vector<Tap> taps;
  taps.reserve(height * width);
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) taps.push_back({i * width + j, i * w + j, 1.0});
  return linear_resample(x, Shape{height, width, x.shape()[2]}, std::move(taps), "crop");
}

template <class T>
Var<T> resize_bilinear(const Var<T>& x, std::size_t height, std::size_t width) {
  require_image(x.shape(), "resize_bilinear");
  if (height == 0 || width == 0) throw ShapeError("resize_bilinear: empty target");
  const std::size_t h = x.shape()[0], w = x.shape()[1];
  const auto ty = bilinear_taps_1d(h, height);
  const auto tx = bilinear_taps_1d(w, width);
  std::vector<Tap> taps;
  taps.reserve(ty.size() * tx.size());
  for (const auto& [oy, iy, wy] : ty)
    for (const auto& [ox, ix, wx] : tx) taps.push_back({oy * width + ox, iy * w + ix, wy * wx});
  return linear_resample(x, Shape{height, width, x.shape()[2]}, std::move(taps), "resize_bilinear");
}

// --- wavelet / scan --------------------------------------------------------

// The orthonormal Haar block matrix is symmetric and its own inverse, so the
// adjoint of the forward transform is the inverse transform and vice versa.
template <class T>
Var<T> dwt2(const Var<T>& x) {
  auto out = dwt2_packed(x.value());
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "dwt2", {x}, [tape, x](const Tensor<T>& g) { tape->accumulate(x, iwt2_packed(g)); });
}

template <class T>
Var<T> iwt2(const Var<T>& x) {
  auto out = iwt2_packed(x.value());
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "iwt2", {x}, [tape, x](const Tensor<T>& g) { tape->accumulate(x, dwt2_packed(g)); });
}

template <class T>
Var<T> unfold(const Var<T>& x, ScanDirection d) {
  auto out = wavessm::unfold(x.value(), d);
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "unfold", {x}, [tape, x, d](const Tensor<T>& g) {
    tape->accumulate(x, wavessm::fold(g, d, x.shape()[0], x.shape()[1]));
  });
}

template <class T>
Var<T> fold(const Var<T>& seq, ScanDirection d, std::size_t height, std::size_t width) {
  auto out = wavessm::fold(seq.value(), d, height, width);
  auto* tape = tape_of<T>({seq});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "fold", {seq},
                      [tape, seq, d](const Tensor<T>& g) { tape->accumulate(seq, wavessm::unfold(g, d)); });
}

template <class T>
Var<T> selective_scan(const Var<T>& u, const Var<T>& delta, const Var<T>& A, const Var<T>& B, const Var<T>& C,
                      const Var<T>& Dskip) {
  SsmParams<T> p{A.value(), B.value(), C.value(), Dskip.value(), delta.value()};
  auto out = selective_scan_par(u.value(), p);
  auto* tape = tape_of<T>({u, delta, A, B, C, Dskip});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "selective_scan", {u, delta, A, B, C, Dskip},
                      [tape, u, delta, A, B, C, Dskip](const Tensor<T>& g) {
                        SsmParams<T> p{A.value(), B.value(), C.value(), Dskip.value(), delta.value()};
                        auto gr = selective_scan_backward(u.value(), p, g);
                        tape->accumulate(u, gr.du);
                        tape->accumulate(delta, gr.dDelta);
                        tape->accumulate(A, gr.dA);
                        tape->accumulate(B, gr.dB);
                        tape->accumulate(C, gr.dC);
                        tape->accumulate(Dskip, gr.dDskip.reshaped(Dskip.shape()));
                      });
}

// --- losses ----------------------------------------------------------------

template <class T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(wavessm::sum(x.value()));
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "sum", {x},
                      [tape, x](const Tensor<T>& g) { tape->accumulate(x, Tensor<T>(x.shape(), g[0])); });
}

template <class T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  check_same_shape(x.value(), weights, "weighted_sum");
  T s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  auto* tape = tape_of<T>({x});
  if (!tape) return Var<T>(Tensor<T>::scalar(s));
  return tape->record(Tensor<T>::scalar(s), "weighted_sum", {x},
                      [tape, x, weights](const Tensor<T>& g) { tape->accumulate(x, wavessm::scale(weights, g[0])); });
}

template <class T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target) {
  check_same_shape(pred.value(), target.value(), "l1_loss");
  const std::size_t n = pred.value().size();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.value()[i] - target.value()[i]);
  Tensor<T> out = Tensor<T>::scalar(s / static_cast<T>(n));
  auto* tape = tape_of<T>({pred, target});
  if (!tape) return Var<T>(std::move(out));
  return tape->record(std::move(out), "l1_loss", {pred, target}, [tape, pred, target, n](const Tensor<T>& g) {
    Tensor<T> dp(pred.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const T diff = pred.value()[i] - target.value()[i];
      const T sign = diff > 0 ? T{1} : (diff < 0 ? T{-1} : T{0});
      dp[i] = g[0] * sign / static_cast<T>(n);
    }
    if (pred.tracked()) tape->accumulate(pred, dp);
    if (target.tracked()) tape->accumulate(target, wavessm::scale(dp, T{-1}));
  });
}

#define WAVESSM_INSTANTIATE(T)                                                                       \
  template class Tape<T>;                                                                            \
  template Tape<T>* tape_of(const std::vector<Var<T>>&);                                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> scale(const Var<T>&, T);                                                           \
  template Var<T> exp(const Var<T>&);                                                                \
  template Var<T> activation(const Var<T>&, Activation);                                             \
  template Var<T> clamp(const Var<T>&, T, T);                                                        \
  template Var<T> mul_channels(const Var<T>&, const Var<T>&);                                        \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                            \
  template Var<T> div_by_element(const Var<T>&, const Var<T>&, std::size_t);                         \
  template Var<T> reshape(const Var<T>&, Shape);                                                     \
  template Var<T> transpose(const Var<T>&);                                                          \
  template Var<T> slice_last(const Var<T>&, std::size_t, std::size_t);                               \
  template Var<T> concat_last(const std::vector<Var<T>>&);                                           \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                               \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                           \
  template Var<T> gather_last(const Var<T>&, const std::vector<std::size_t>&);                       \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvSpec&);              \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                        \
  template Var<T> softmax(const Var<T>&, std::size_t);                                               \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                              \
  template Var<T> l2_normalize_rows(const Var<T>&, T);                                               \
  template Var<T> mean_spatial(const Var<T>&);                                                       \
  template Var<T> pad_reflect(const Var<T>&, std::size_t, std::size_t);                              \
  template Var<T> crop(const Var<T>&, std::size_t, std::size_t);                                     \
  template Var<T> resize_bilinear(const Var<T>&, std::size_t, std::size_t);                         \
  template Var<T> dwt2(const Var<T>&);                                                               \
  template Var<T> iwt2(const Var<T>&);                                                               \
  template Var<T> unfold(const Var<T>&, ScanDirection);                                              \
  template Var<T> fold(const Var<T>&, ScanDirection, std::size_t, std::size_t);                      \
  template Var<T> selective_scan(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,         \
                                 const Var<T>&, const Var<T>&);                                      \
  template Var<T> sum(const Var<T>&);                                                                \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                                     \
  template Var<T> l1_loss(const Var<T>&, const Var<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm::ad
