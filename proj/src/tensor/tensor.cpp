#include "tensor/tensor.hpp"

#include <algorithm>

namespace sf {

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, ErrorCode::kInvalidArgument, "non-positive dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), fill);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_numel(shape_) == data_.size(), ErrorCode::kInvalidArgument,
          "data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_str(shape_));
}

template <class T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  require(shape_numel(shape) == data_.size(), ErrorCode::kInvalidArgument,
          "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor<T>(std::move(shape), data_);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace sf
