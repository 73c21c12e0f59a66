#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tensor/tape.hpp"

namespace sf {

/// Ordered name -> tensor map. Insertion order is the serialization order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor<float> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<float>& at(const std::string& name);
  const Tensor<float>& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  const std::vector<std::pair<std::string, Tensor<float>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor<float>>>& entries() { return entries_; }
  std::vector<std::string> names() const;

  bool operator==(const ParamStore& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor<float>>> entries_;
  std::map<std::string, std::size_t> index_;
};

enum class InitKind { kKaiming, kZero, kOne };

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::kKaiming;
};

/// Kaiming-uniform (bound sqrt(3 / fan_in)), zeros or ones. Each parameter
/// draws from its own stream keyed by (seed, hash(name)).
Tensor<float> init_param(const ParamSpec& spec, std::uint64_t seed);

/// Hands out tape leaves for named parameters, one leaf per name per tape, so
/// a weight used twice accumulates both contributions on one leaf.
template <class T>
class ParamBinder {
 public:
  ParamBinder(Tape<T>& tape, const ParamStore* store, bool requires_grad)
      : tape_(&tape), store_(store), requires_grad_(requires_grad) {}

  Var<T> operator()(const std::string& name);
  /// Pre-binds a name to an existing var (used by gradient checks).
  void bind(const std::string& name, Var<T> v) { bound_[name] = v; }

  Tape<T>& tape() { return *tape_; }
  const std::map<std::string, Var<T>>& bound() const { return bound_; }

 private:
  Tape<T>* tape_;
  const ParamStore* store_;
  bool requires_grad_;
  std::map<std::string, Var<T>> bound_;
};

extern template class ParamBinder<float>;
extern template class ParamBinder<double>;

}  // namespace sf
