#include "tensor/tape.hpp"

#include <cmath>

namespace sf {

template <class T>
void Tape<T>::check_owned(const Var<T>& v) const {
  require(v.tape() == this, ErrorCode::kInvalidArgument, "variable belongs to a different tape");
  require(v.id() >= 0 && static_cast<std::size_t>(v.id()) < nodes_.size(),
          ErrorCode::kInvalidArgument, "variable handle out of range");
}

template <class T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  require(!consumed_, ErrorCode::kState, "tape already consumed by backward");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<int>(nodes_.size() - 1));
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn rule) {
  return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                std::move(rule));
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn rule) {
  require(!consumed_, ErrorCode::kState, "tape already consumed by backward");
#ifdef SF_CHECK_FINITE
  for (T v : value.data()) {
    require(std::isfinite(v), ErrorCode::kNumeric, "non-finite value produced by forward op");
  }
#endif
  Node n;
  n.value = std::move(value);
  for (const auto& v : inputs) {
    check_owned(v);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<int>(nodes_.size() - 1));
}

template <class T>
Tensor<T>& Tape<T>::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <class T>
Gradients<T> Tape<T>::backward(const Var<T>& loss) {
  require(!consumed_, ErrorCode::kState, "tape already consumed by backward");
  check_owned(loss);
  require(loss.value().numel() == 1, ErrorCode::kInvalidArgument,
          "backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  consumed_ = true;

  grad_slot(loss.id()).fill(T(1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.is_leaf || n.grad.empty() || !n.rule) continue;
    n.rule(*this, id);
    // interior gradients are not needed after their rule ran
    if (id != loss.id()) n.grad = Tensor<T>();
  }

  Gradients<T> out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!n.is_leaf || !n.requires_grad) continue;
    out.grads_[static_cast<int>(id)] =
        n.grad.empty() ? Tensor<T>(n.value.shape()) : std::move(n.grad);
  }
  return out;
}

template class Tape<float>;
template class Tape<double>;
template class Var<float>;
template class Var<double>;

}  // namespace sf
