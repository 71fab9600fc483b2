#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavessm/autodiff.hpp"
#include "wavessm/tensor.hpp"

namespace wavessm {

// Named weight tensors in declaration order. Names are dotted paths such as
// "enc.l1.lfss.0.vssm.in_linear.w".
template <class T>
class ParamStore {
 public:
  void add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get_mut(const std::string& name);
  void set(const std::string& name, Tensor<T> value);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  std::size_t numel() const;

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& n : names_) out.add(n, get(n).template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::map<std::string, std::size_t> index_;
};

// Binds store entries to Vars for one forward pass. With a tape every entry
// becomes a trainable leaf; without one they are constants.
template <class T>
class ParamBinder {
 public:
  ParamBinder(const ParamStore<T>& store, ad::Tape<T>* tape) : store_(store), tape_(tape) {}

  ad::Var<T> get(const std::string& name);
  const std::set<std::string>& used() const noexcept { return used_; }
  std::vector<std::string> unused() const;
  ad::Tape<T>* tape() const noexcept { return tape_; }

 private:
  const ParamStore<T>& store_;
  ad::Tape<T>* tape_;
  std::map<std::string, ad::Var<T>> bound_;
  std::set<std::string> used_;
};

// A dotted-prefix view into a binder.
template <class T>
class Scope {
 public:
  Scope(ParamBinder<T>& binder, std::string prefix) : binder_(&binder), prefix_(std::move(prefix)) {}

  ad::Var<T> operator[](const std::string& name) const { return binder_->get(join(name)); }
  Scope sub(const std::string& name) const { return Scope(*binder_, join(name)); }
  Scope sub(const std::string& name, std::size_t index) const {
    return sub(name + "." + std::to_string(index));
  }
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  std::string join(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }
  ParamBinder<T>* binder_;
  std::string prefix_;
};

// Deterministic generator for weight initialisation: splitmix64 seeding of a
// xoshiro256** stream, with uniform doubles built from the top 53 bits so the
// sequence is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();

 private:
  std::uint64_t s_[4];
};

// Declares parameters with their initialisers under a dotted prefix.
template <class T>
class ParamInit {
 public:
  ParamInit(ParamStore<T>& store, Rng& rng, std::string prefix = {})
      : store_(&store), rng_(&rng), prefix_(std::move(prefix)) {}

  ParamInit sub(const std::string& name) const { return ParamInit(*store_, *rng_, join(name)); }
  ParamInit sub(const std::string& name, std::size_t index) const {
    return sub(name + "." + std::to_string(index));
  }

  // Kaiming-uniform weight (bound 1/sqrt(fan_in)) and matching bias for a
  // conv with layout [K,K,Cin/groups,Cout]; registers "<name>.w" and "<name>.b".
  void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t kernel,
            std::size_t groups = 1, bool bias = true);
  void layer_norm(const std::string& name, std::size_t channels);
  void constant(const std::string& name, Shape shape, T value);
  void uniform(const std::string& name, Shape shape, T bound);
  void add(const std::string& name, Tensor<T> value) { store_->add(join(name), std::move(value)); }
  Rng& rng() { return *rng_; }

 private:
  std::string join(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }
  ParamStore<T>* store_;
  Rng* rng_;
  std::string prefix_;
};

// Helpers used by every block for the conventional parameter pairs.
template <class T>
ad::Var<T> conv(const Scope<T>& s, const std::string& name, const ad::Var<T>& x, std::size_t kernel,
                std::size_t groups = 1);
template <class T>
ad::Var<T> norm(const Scope<T>& s, const std::string& name, const ad::Var<T>& x);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace wavessm
