#include "gemr/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace gemr {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor shape " + to_string(shape) + " has a zero dimension");
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), T(0));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  check_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not match payload of " +
                     std::to_string(data_.size()) + " elements");
  }
}

template <typename T>
T Tensor<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return data_[0];
}

template <typename T>
std::span<T> Tensor<T>::grad() const {
  if (grad_.empty()) grad_.assign(data_.size(), T(0));
  return grad_;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  std::fill(grad_.begin(), grad_.end(), T(0));
}

template <typename T>
void Tensor<T>::assign(std::span<const T> values) {
  if (values.size() != data_.size()) {
    throw ShapeError("assign: " + std::to_string(values.size()) + " values into tensor " +
                     to_string(shape_));
  }
  std::copy(values.begin(), values.end(), data_.begin());
}

template <typename T>
Tensor<T>& Tape<T>::hold(Tensor<T> value) {
  storage_.push_back(std::move(value));
  return storage_.back();
}

template <typename T>
Tensor<T>& Tape<T>::output(Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
  return output(std::move(shape), std::span<const Tensor<T>* const>(inputs.begin(), inputs.size()));
}

template <typename T>
Tensor<T>& Tape<T>::output(Shape shape, std::span<const Tensor<T>* const> inputs) {
  bool needs = false;
  if (recording_) {
    needs = std::any_of(inputs.begin(), inputs.end(),
                        [](const Tensor<T>* t) { return t->requires_grad(); });
  }
  storage_.emplace_back(std::move(shape), needs);
  return storage_.back();
}

template <typename T>
void Tape<T>::record(const Tensor<T>& out, BackwardFn fn) {
  if (recording_ && out.requires_grad()) nodes_.push_back({&out, std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  loss.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output->has_grad()) continue;
    it->fn();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace gemr
