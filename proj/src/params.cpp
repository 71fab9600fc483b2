#include "wavessm/params.hpp"

#include <cmath>
#include <numbers>

namespace wavessm {

template <class T>
void ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (index_.count(name)) throw ConfigError("parameter '" + name + "' declared twice");
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

template <class T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return values_[it->second];
}

template <class T>
Tensor<T>& ParamStore<T>::get_mut(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return values_[it->second];
}

template <class T>
void ParamStore<T>::set(const std::string& name, Tensor<T> value) {
  Tensor<T>& slot = get_mut(name);
  if (slot.shape() != value.shape())
    throw ShapeError("parameter '" + name + "' has shape " + shape_str(slot.shape()) + ", cannot assign " +
                     shape_str(value.shape()));
  slot = std::move(value);
}

template <class T>
std::size_t ParamStore<T>::numel() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <class T>
ad::Var<T> ParamBinder<T>::get(const std::string& name) {
  used_.insert(name);
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var<T> v = tape_ ? tape_->leaf(store_.get(name), name) : ad::Var<T>(store_.get(name));
  bound_.emplace(name, v);
  return v;
}

template <class T>
std::vector<std::string> ParamBinder<T>::unused() const {
  std::vector<std::string> out;
  for (const auto& n : store_.names())
    if (!used_.count(n)) out.push_back(n);
  return out;
}

// --- rng -------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// --- init ------------------------------------------------------------------

template <class T>
void ParamInit<T>::conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t kernel,
                        std::size_t groups, bool bias) {
  if (groups == 0 || cin % groups || cout % groups)
    throw ConfigError("conv '" + join(name) + "': groups must divide channel counts");
  const std::size_t fan_in = kernel * kernel * (cin / groups);
  const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(fan_in)));
  uniform(name + ".w", Shape{kernel, kernel, cin / groups, cout}, bound);
  if (bias) uniform(name + ".b", Shape{cout}, bound);
}

template <class T>
void ParamInit<T>::layer_norm(const std::string& name, std::size_t channels) {
  constant(name + ".gamma", Shape{channels}, T{1});
  constant(name + ".beta", Shape{channels}, T{0});
}

template <class T>
void ParamInit<T>::constant(const std::string& name, Shape shape, T value) {
  add(name, Tensor<T>(std::move(shape), value));
}

template <class T>
void ParamInit<T>::uniform(const std::string& name, Shape shape, T bound) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng_->uniform(-bound, bound));
  add(name, std::move(t));
}

template <class T>
ad::Var<T> conv(const Scope<T>& s, const std::string& name, const ad::Var<T>& x, std::size_t kernel,
                std::size_t groups) {
  return ad::conv2d(x, s[name + ".w"], s[name + ".b"], ConvSpec{kernel, groups});
}

template <class T>
ad::Var<T> norm(const Scope<T>& s, const std::string& name, const ad::Var<T>& x) {
  return ad::layer_norm(x, s[name + ".gamma"], s[name + ".beta"], static_cast<T>(kLayerNormEps));
}

#define WAVESSM_INSTANTIATE(T)                                                                       \
  template class ParamStore<T>;                                                                      \
  template class ParamBinder<T>;                                                                     \
  template class ParamInit<T>;                                                                       \
  template ad::Var<T> conv(const Scope<T>&, const std::string&, const ad::Var<T>&, std::size_t,      \
                           std::size_t);                                                             \
  template ad::Var<T> norm(const Scope<T>&, const std::string&, const ad::Var<T>&);

WAVESSM_INSTANTIATE(float)
WAVESSM_INSTANTIATE(double)

#undef WAVESSM_INSTANTIATE

}  // namespace wavessm
