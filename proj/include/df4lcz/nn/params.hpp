#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

template <class T>
struct ParamEntry {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> adam_m;
  BasicTensor<T> adam_v;
  std::uint64_t step_count = 0;
};

/// Named trainable tensors plus their gradients and Adam moments.
/// Iteration order is insertion order, which keeps checkpoints and optimizer
/// updates deterministic.
template <class T>
class ParamStore {
 public:
  ParamEntry<T>& add(const std::string& name, BasicTensor<T> value) {
    if (index_.count(name)) throw ConsistencyError("duplicate parameter name '" + name + "'");
    ParamEntry<T> e;
    e.name = name;
    e.grad = BasicTensor<T>(value.shape());
    e.adam_m = BasicTensor<T>(value.shape());
    e.adam_v = BasicTensor<T>(value.shape());
    e.value = std::move(value);
    index_.emplace(name, entries_.size());
    entries_.push_back(std::move(e));
    return entries_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  ParamEntry<T>& entry(const std::string& name) { return entries_[lookup(name)]; }
  const ParamEntry<T>& entry(const std::string& name) const { return entries_[lookup(name)]; }

  BasicTensor<T>& value(const std::string& name) { return entry(name).value; }
  const BasicTensor<T>& value(const std::string& name) const { return entry(name).value; }
  BasicTensor<T>& grad(const std::string& name) { return entry(name).grad; }
  const BasicTensor<T>& grad(const std::string& name) const { return entry(name).grad; }

  std::vector<ParamEntry<T>>& entries() noexcept { return entries_; }
  const std::vector<ParamEntry<T>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) {
      if (e.grad.shape() != e.value.shape()) e.grad = BasicTensor<T>(e.value.shape());
      e.grad.fill(T{});
    }
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) {
      auto& o = out.add(e.name, e.value.template cast<U>());
      o.adam_m = e.adam_m.template cast<U>();
      o.adam_v = e.adam_v.template cast<U>();
      o.step_count = e.step_count;
    }
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConsistencyError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<ParamEntry<T>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// He-uniform initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class T>
BasicTensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// One bias-corrected Adam update over every entry. Gradients are read but not
/// cleared; the caller zeroes them before the next accumulation.
template <class T>
void adam_step(ParamStore<T>& params, double lr, const AdamConfig& cfg = {}) {
  for (const auto& e : params.entries()) {
    if (e.grad.shape() != e.value.shape()) {
      throw ConsistencyError("adam_step: parameter '" + e.name + "' has no gradient of shape " +
                             shape_str(e.value.shape()));
    }
  }
  for (auto& e : params.entries()) {
    ++e.step_count;
    const double t = static_cast<double>(e.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      const double m = cfg.beta1 * e.adam_m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * e.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      e.adam_m[i] = static_cast<T>(m);
      e.adam_v[i] = static_cast<T>(v);
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      e.value[i] = static_cast<T>(e.value[i] - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

}  // namespace df4lcz
