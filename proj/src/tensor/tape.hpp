#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace sf {

template <class T>
class Tape;

/// Handle to a value recorded on a Tape.
template <class T>
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// Gradients returned by Tape::backward, keyed by leaf id.
template <class T>
class Gradients {
 public:
  const Tensor<T>& at(const Var<T>& v) const { return grads_.at(v.id()); }
  bool contains(const Var<T>& v) const { return grads_.count(v.id()) != 0; }
  const std::map<int, Tensor<T>>& all() const { return grads_; }

 private:
  friend class Tape<T>;
  std::map<int, Tensor<T>> grads_;
};

/// Append-only record of operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so every node's inputs precede it.
/// backward() walks the record once in reverse and then marks the tape
/// consumed; a second call is a state error. A tape is single-threaded.
template <class T>
class Tape {
 public:
  /// Called with the tape and the index of the node being differentiated.
  /// The rule reads grad(node) and accumulates into grad_slot(input).
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn rule);
  Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn rule);

  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  const Tensor<T>& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator for `id`, zero-allocated on first use.
  Tensor<T>& grad_slot(int id);
  int input(int node, std::size_t k) const { return nodes_[node].inputs[k]; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  Gradients<T> backward(const Var<T>& loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = false;
    std::vector<int> inputs;
    BackwardFn rule;
  };

  void check_owned(const Var<T>& v) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <class T>
bool Var<T>::requires_grad() const {
  return tape_->needs_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace sf
