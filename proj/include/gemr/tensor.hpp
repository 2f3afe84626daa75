#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gemr {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when operand shapes are not conformable. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { Train, Eval };

/// Dense row-major tensor with an optional gradient buffer.
///
/// Scalars have shape {1}. The gradient buffer is allocated on first use and
/// is `mutable` so parameters reached through const references can still
/// accumulate gradients during backward.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  T item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Allocates a zero gradient buffer if none exists.
  std::span<T> grad() const;
  void zero_grad() const;
  void clear_grad() const { grad_.clear(); }

  /// Same shape, new payload; keeps requires_grad.
  void assign(std::span<const T> values);

 private:
  Shape shape_;
  std::vector<T> data_;
  mutable std::vector<T> grad_;
  bool requires_grad_ = false;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> out(src.data().begin(), src.data().end());
  return Tensor<To>(src.shape(), std::move(out), src.requires_grad());
}

/// Records primitive applications in execution order for reverse-mode
/// differentiation, and owns every intermediate tensor it produces.
///
/// Nodes are appended as primitives run, so the record is already a
/// topological order. Inputs that are not owned by the tape (parameters,
/// held constants) must outlive it. A non-recording tape is used for
/// inference: it still owns intermediates but stores no backward closures.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Takes ownership of a constant; the returned reference is stable.
  Tensor<T>& hold(Tensor<T> value);

  /// Allocates an output for a primitive. It requires grad iff the tape is
  /// recording and any input does.
  Tensor<T>& output(Shape shape, std::initializer_list<const Tensor<T>*> inputs);
  Tensor<T>& output(Shape shape, std::span<const Tensor<T>* const> inputs);

  void record(const Tensor<T>& out, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse, visiting
  /// each node once. Gradients accumulate into existing buffers.
  void backward(const Tensor<T>& loss);

  /// Running hash of piecewise-linear branch decisions (ReLU masks) taken on
  /// this tape. Two evaluations with equal hashes followed the same branches.
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }
  void mix_branch(std::uint64_t value) noexcept {
    branch_signature_ = (branch_signature_ ^ value) * 0x100000001b3ull + 0x9e3779b97f4a7c15ull;
  }

 private:
  struct Node {
    const Tensor<T>* output;
    BackwardFn fn;
  };
  bool recording_;
  std::uint64_t branch_signature_ = 0xcbf29ce484222325ull;
  std::deque<Tensor<T>> storage_;
  std::vector<Node> nodes_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace gemr
