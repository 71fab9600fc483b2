#include "wavessm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wavessm/parallel.hpp"

namespace wavessm {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in shape " + shape_str(shape_));
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("tensor: shape " + shape_str(shape_) + " holds " +
                     std::to_string(shape_numel(shape_)) + " values but " +
                     std::to_string(data_.size()) + " were given");
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape_));
  return shape_[axis];
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

template <class T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::kSiLU: return "silu";
    case Activation::kGELU: return "gelu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftplus: return "softplus";
  }
  return "?";
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <class T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]))
      throw NumericError(std::string(what) + ": non-finite value at flat index " + std::to_string(i));
  }
}

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// --- elementwise -----------------------------------------------------------

namespace {

template <class T, class F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, const char* what, F f) {
  check_same_shape(a, b, what);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, "mul", [](T x, T y) { return x * y; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

template <class T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& b) {
  check_same_shape(acc, b, "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

template <class T>
Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& v) {
  const std::size_t c = x.shape().back();
  if (v.size() != c)
    throw ShapeError("mul_channels: channel axis has " + std::to_string(c) + " but scale has " +
                     std::to_string(v.size()));
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= v[i % c];
  return out;
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
T sum(const Tensor<T>& a) {
  T s = 0;
  for (auto v : a.data()) s += v;
  return s;
}

// --- convolution -----------------------------------------------------------

namespace {

struct ConvDims {
  std::size_t h, w, cin, cout, k, cin_per_group, cout_per_group;
};

template <class T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [H,W,C], got " + shape_str(x.shape()));
  if (w.rank() != 4)
    throw ShapeError("conv2d: weight must be [K,K,Cin/groups,Cout], got " + shape_str(w.shape()));
  if (spec.kernel_size != 1 && spec.kernel_size != 3)
    throw ShapeError("conv2d: kernel size must be 1 or 3, got " + std::to_string(spec.kernel_size));
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), w.dim(3), spec.kernel_size, 0, 0};
  if (w.dim(0) != d.k || w.dim(1) != d.k)
    throw ShapeError("conv2d: weight kernel axes (0,1) are " + std::to_string(w.dim(0)) + "x" +
                     std::to_string(w.dim(1)) + " but spec says " + std::to_string(d.k));
  if (spec.groups == 0 || d.cin % spec.groups != 0 || d.cout % spec.groups != 0)
    throw ShapeError("conv2d: groups=" + std::to_string(spec.groups) +
                     " must divide input channels (axis 2, " + std::to_string(d.cin) +
                     ") and output channels (" + std::to_string(d.cout) + ")");
  d.cin_per_group = d.cin / spec.groups;
  d.cout_per_group = d.cout / spec.groups;
  if (w.dim(2) != d.cin_per_group)
    throw ShapeError("conv2d: input channel axis (axis 2) has " + std::to_string(d.cin) +
                     " channels, weight axis 2 expects " + std::to_string(w.dim(2) * spec.groups) +
                     " (groups=" + std::to_string(spec.groups) + ")");
  return d;
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec) {
  const ConvDims d = conv_dims(x, w, spec);
  if (!b.empty() && b.size() != d.cout)
    throw ShapeError("conv2d: bias has " + std::to_string(b.size()) + " entries, expected " +
                     std::to_string(d.cout));
  Tensor<T> out(Shape{d.h, d.w, d.cout});
  const auto pad = static_cast<std::ptrdiff_t>(d.k / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.h);
  const auto W = static_cast<std::ptrdiff_t>(d.w);
  const std::size_t work_per_row = d.w * d.cout * d.k * d.k * d.cin_per_group;
  parallel_for(d.h, std::max<std::size_t>(1, (1u << 16) / std::max<std::size_t>(work_per_row, 1)),
               [&](std::size_t y0, std::size_t y1) {
    std::vector<T> acc(d.cout);
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        for (std::size_t o = 0; o < d.cout; ++o) acc[o] = b.empty() ? T{0} : b[o];
        for (std::size_t ky = 0; ky < d.k; ++ky) {
          const auto iy = reflect_index(static_cast<std::ptrdiff_t>(y + ky) - pad, H);
          for (std::size_t kx = 0; kx < d.k; ++kx) {
            const auto ix = reflect_index(static_cast<std::ptrdiff_t>(xx + kx) - pad, W);
            const T* px = &x.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
            const T* pw = &w[((ky * d.k + kx) * d.cin_per_group) * d.cout];
            for (std::size_t o = 0; o < d.cout; ++o) {
              const std::size_t g = o / d.cout_per_group;
              const T* pxg = px + g * d.cin_per_group;
              T s = 0;
              for (std::size_t ci = 0; ci < d.cin_per_group; ++ci) s += pxg[ci] * pw[ci * d.cout + o];
              acc[o] += s;
            }
          }
        }
        T* po = &out.at(y, xx, 0);
        for (std::size_t o = 0; o < d.cout; ++o) po[o] = acc[o];
      }
    }
  });
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                             const ConvSpec& spec, const Tensor<T>& dy) {
  const ConvDims d = conv_dims(x, w, spec);
  if (dy.shape() != Shape{d.h, d.w, d.cout})
    throw ShapeError("conv2d_backward: upstream gradient shape " + shape_str(dy.shape()));
  ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()),
                 has_bias ? Tensor<T>(Shape{d.cout}) : Tensor<T>()};
  const auto pad = static_cast<std::ptrdiff_t>(d.k / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.h);
  const auto W = static_cast<std::ptrdiff_t>(d.w);
  for (std::size_t y = 0; y < d.h; ++y) {
    for (std::size_t xx = 0; xx < d.w; ++xx) {
      const T* pdy = &dy.at(y, xx, 0);
      if (has_bias)
        for (std::size_t o = 0; o < d.cout; ++o) g.db[o] += pdy[o];
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        const auto iy = static_cast<std::size_t>(
            reflect_index(static_cast<std::ptrdiff_t>(y + ky) - pad, H));
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const auto ix = static_cast<std::size_t>(
              reflect_index(static_cast<std::ptrdiff_t>(xx + kx) - pad, W));
          const T* px = &x.at(iy, ix, 0);
          T* pdx = &g.dx.at(iy, ix, 0);
          const std::size_t wbase = ((ky * d.k + kx) * d.cin_per_group) * d.cout;
          for (std::size_t o = 0; o < d.cout; ++o) {
            const std::size_t gi = (o / d.cout_per_group) * d.cin_per_group;
            const T go = pdy[o];
            for (std::size_t ci = 0; ci < d.cin_per_group; ++ci) {
              g.dw[wbase + ci * d.cout + o] += go * px[gi + ci];
              pdx[gi + ci] += go * w[wbase + ci * d.cout + o];
            }
          }
        }
      }
    }
  }
  return g;
}

// --- layer norm ------------------------------------------------------------

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (!(eps > 0)) throw ShapeError("layer_norm: eps must be positive");
  const std::size_t c = x.shape().back();
  if (gamma.size() != c || beta.size() != c)
    throw ShapeError("layer_norm: channel axis has " + std::to_string(c) + " but gamma/beta have " +
                     std::to_string(gamma.size()) + "/" + std::to_string(beta.size()));
  Tensor<T> out(x.shape());
  const std::size_t rows = x.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* px = &x[r * c];
    T mean = 0;
    for (std::size_t i = 0; i < c; ++i) mean += px[i];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t i = 0; i < c; ++i) var += (px[i] - mean) * (px[i] - mean);
    var /= static_cast<T>(c);
    const T inv = T{1} / std::sqrt(var + eps);
    T* po = &out[r * c];
    for (std::size_t i = 0; i < c; ++i) po[i] = (px[i] - mean) * inv * gamma[i] + beta[i];
  }
  return out;
}

template <class T>
LayerNormGrads<T> layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, T eps,
                                      const Tensor<T>& dy) {
  const std::size_t c = x.shape().back();
  check_same_shape(x, dy, "layer_norm_backward");
  LayerNormGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};
  const std::size_t rows = x.size() / c;
  std::vector<T> xhat(c), dxhat(c);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* px = &x[r * c];
    const T* pdy = &dy[r * c];
    T mean = 0;
    for (std::size_t i = 0; i < c; ++i) mean += px[i];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t i = 0; i < c; ++i) var += (px[i] - mean) * (px[i] - mean);
    var /= static_cast<T>(c);
    const T inv = T{1} / std::sqrt(var + eps);
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (std::size_t i = 0; i < c; ++i) {
      xhat[i] = (px[i] - mean) * inv;
      dxhat[i] = pdy[i] * gamma[i];
      g.dgamma[i] += pdy[i] * xhat[i];
      g.dbeta[i] += pdy[i];
      mean_dxhat += dxhat[i];
      mean_dxhat_xhat += dxhat[i] * xhat[i];
    }
    mean_dxhat /= static_cast<T>(c);
    mean_dxhat_xhat /= static_cast<T>(c);
    T* pdx = &g.dx[r * c];
    for (std::size_t i = 0; i < c; ++i) pdx[i] = inv * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
  }
  return g;
}

// --- activations -----------------------------------------------------------

namespace {

template <class T>
T sigmoid(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <class T>
T activate(T x, Activation kind) {
  switch (kind) {
    case Activation::kSiLU: return x * sigmoid(x);
    case Activation::kGELU: return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kSoftplus: return x > T{20} ? x : std::log1p(std::exp(x));
  }
  return x;
}

template <class T>
T activate_derivative(T x, Activation kind) {
  switch (kind) {
    case Activation::kSiLU: {
      const T s = sigmoid(x);
      return s * (T{1} + x * (T{1} - s));
    }
    case Activation::kGELU: {
      const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
      const T pdf = std::exp(T{-0.5} * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
      return cdf + x * pdf;
    }
    case Activation::kSigmoid: {
      const T s = sigmoid(x);
      return s * (T{1} - s);
    }
    case Activation::kSoftplus: return sigmoid(x);
  }
  return T{1};
}

template <class T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(x[i], kind);
  return out;
}

template <class T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& dy, Activation kind) {
  check_same_shape(x, dy, "activation_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dy[i] * activate_derivative(x[i], kind);
  return dx;
}

// --- softmax ---------------------------------------------------------------

namespace {

struct AxisView {
  std::size_t outer, len, inner;
};

template <class T>
AxisView axis_view(const Tensor<T>& x, std::size_t axis, const char* what) {
  if (axis >= x.rank())
    throw ShapeError(std::string(what) + ": axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(x.shape()));
  AxisView v{1, x.dim(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) v.inner *= x.dim(i);
  return v;
}

}  // namespace

template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisView v = axis_view(x, axis, "softmax");
  Tensor<T> y(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.len * v.inner + in;
      T m = x[base];
      for (std::size_t k = 1; k < v.len; ++k) m = std::max(m, x[base + k * v.inner]);
      T s = 0;
      for (std::size_t k = 0; k < v.len; ++k) {
        const T e = std::exp(x[base + k * v.inner] - m);
        y[base + k * v.inner] = e;
        s += e;
      }
      for (std::size_t k = 0; k < v.len; ++k) y[base + k * v.inner] /= s;
    }
  }
  return y;
}

template <class T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy, std::size_t axis) {
  check_same_shape(y, dy, "softmax_backward");
  const AxisView v = axis_view(y, axis, "softmax_backward");
  Tensor<T> dx(y.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.len * v.inner + in;
      T dot = 0;
      for (std::size_t k = 0; k < v.len; ++k) dot += y[base + k * v.inner] * dy[base + k * v.inner];
      for (std::size_t k = 0; k < v.len; ++k) {
        const std::size_t i = base + k * v.inner;
        dx[i] = y[i] * (dy[i] - dot);
      }
    }
  }
  return dx;
}

// --- matmul ----------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: operands must be rank 2, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                     std::to_string(b.dim(0)) + ")");
  Tensor<T> c(Shape{m, n});
  parallel_for(m, std::max<std::size_t>(1, (1u << 15) / std::max<std::size_t>(k * n, 1)),
               [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      T* pc = &c[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * k + p];
        const T* pb = &b[p * n];
        for (std::size_t j = 0; j < n; ++j) pc[j] += av * pb[j];
      }
    }
  });
  return c;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose: operand must be rank 2, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> t(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

#define WAVESSM_INSTANTIATE(T)                                                                    \
  template class Tensor<T>;                                                                       \
  template void check_finite(const Tensor<T>&, const char*);                                      \
  template void check_same_shape(const Tensor<T>&, const Tensor<T>&, const char*);                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul_channels(const Tensor<T>&, const Tensor<T>&);                            \
  template T max_abs_diff(const Tensor<T>&, const Tensor<T>&);                                    \
  template T sum(const Tensor<T>&);                                                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvSpec&); \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, bool, const ConvSpec&, \
                                        const Tensor<T>&);                                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);         \
  template LayerNormGrads<T> layer_norm_backward(const Tensor<T>&, const Tensor<T>&, T,           \
                                                 const Tensor<T>&);                               \
  template T activate(T, Activation);                                                             \
  template T activate_derivative(T, Activation);                                                  \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                    \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation);         \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> softmax_backward(const Tensor<T>&, const Tensor<T>&, std::size_t);           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> transpose(const Tensor<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
