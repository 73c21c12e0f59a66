#include "model/params.hpp"

#include <cmath>

#include "common/rng.hpp"

namespace sf {

void ParamStore::add(const std::string& name, Tensor<float> value) {
  require(!contains(name), ErrorCode::kState, "duplicate parameter name " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(value));
}

Tensor<float>& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kInvalidArgument, "unknown parameter " + name);
  return entries_[it->second].second;
}

const Tensor<float>& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

Tensor<float> init_param(const ParamSpec& spec, std::uint64_t seed) {
  Tensor<float> t(spec.shape);
  switch (spec.init) {
    case InitKind::kZero: break;
    case InitKind::kOne: t.fill(1.0f); break;
    case InitKind::kKaiming: {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
      const float bound = static_cast<float>(std::sqrt(3.0 / static_cast<double>(fan_in)));
      CounterRng rng(seed, hash_string(spec.name));
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
      break;
    }
  }
  return t;
}

template <class T>
Var<T> ParamBinder<T>::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  require(store_ != nullptr, ErrorCode::kInvalidArgument, "unbound parameter " + name);
  Var<T> v;
  if constexpr (std::is_same_v<T, float>)
    v = tape_->leaf(store_->at(name), requires_grad_);
  else
    v = tape_->leaf(store_->at(name).template cast<T>(), requires_grad_);
  bound_.emplace(name, v);
  return v;
}

template class ParamBinder<float>;
template class ParamBinder<double>;

}  // namespace sf
