#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gemr/ops.hpp"
#include "gemr/rng.hpp"
#include "gemr/tensor.hpp"

namespace gemr {

/// Shape of a multi-layer perceptron encoder: input -> hidden... -> output,
/// rectified-linear between layers and none after the last. No hidden
/// layers with output_dim == input_dim is the parameter-free identity.
struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  std::size_t output_dim = 0;

  bool is_identity() const { return hidden_widths.empty() && output_dim == input_dim; }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
};

/// Train-mode dropout applied after each hidden layer. p == 0 disables it.
struct DropoutSpec {
  double p = 0.0;
  Philox* rng = nullptr;
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Encoder(EncoderConfig config, Philox& rng);

  const EncoderConfig& config() const { return config_; }
  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }

  /// x[n, input_dim] -> [n, output_dim], applied row by row with shared weights.
  const Tensor<T>& forward(Tape<T>& tape, const Tensor<T>& x, Mode mode, DropoutSpec dropout = {}) const;

  template <typename U>
  Encoder<U> cast() const;

 private:
  EncoderConfig config_;
  std::vector<DenseLayer<T>> layers_;

  template <typename U>
  friend class Encoder;
};

/// Global context vector [input_dim] -> feature vector [output_dim].
template <typename T>
const Tensor<T>& encode_global(Tape<T>& tape, const Encoder<T>& encoder, const Tensor<T>& context,
                               Mode mode, DropoutSpec dropout = {});

/// Raw faces [n, input_dim] -> [n, output_dim]; n >= 1.
template <typename T>
const Tensor<T>& encode_faces(Tape<T>& tape, const Encoder<T>& encoder, const Tensor<T>& faces,
                              Mode mode, DropoutSpec dropout = {});

template <typename T>
template <typename U>
Encoder<U> Encoder<T>::cast() const {
  Encoder<U> out;
  out.config_ = config_;
  for (const auto& l : layers_) out.layers_.push_back({tensor_cast<U>(l.weight), tensor_cast<U>(l.bias)});
  return out;
}

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace gemr
