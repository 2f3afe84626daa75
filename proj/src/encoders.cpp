#include "gemr/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace gemr {

void EncoderConfig::validate() const {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("encoder dimensions must be positive");
  for (auto w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("encoder hidden widths must be positive");
  }
}

template <typename T>
Encoder<T>::Encoder(EncoderConfig config, Philox& rng) : config_(std::move(config)) {
  config_.validate();
  if (config_.is_identity()) return;
  std::vector<std::size_t> widths{config_.input_dim};
  widths.insert(widths.end(), config_.hidden_widths.begin(), config_.hidden_widths.end());
  widths.push_back(config_.output_dim);
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const std::size_t in = widths[i - 1], out = widths[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<T> w(in * out);
    for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
    layers_.push_back({Tensor<T>({out, in}, std::move(w), true), Tensor<T>({out}, true)});
  }
}

template <typename T>
const Tensor<T>& Encoder<T>::forward(Tape<T>& tape, const Tensor<T>& x, Mode mode, DropoutSpec dropout_spec) const {
  if (x.rank() != 2 || x.dim(1) != config_.input_dim) {
    throw ShapeError("encoder: input " + to_string(x.shape()) + " does not match input_dim " +
                     std::to_string(config_.input_dim));
  }
  const Tensor<T>* h = &x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = &linear(tape, *h, layers_[i].weight, layers_[i].bias);
    if (i + 1 < layers_.size()) {
      h = &relu(tape, *h);
      if (mode == Mode::Train && dropout_spec.p > 0.0) h = &dropout(tape, *h, dropout_spec.p, mode, *dropout_spec.rng);
    }
  }
  return *h;
}

template <typename T>
const Tensor<T>& encode_global(Tape<T>& tape, const Encoder<T>& encoder, const Tensor<T>& context,
                               Mode mode, DropoutSpec dropout_spec) {
  if (context.rank() != 1) throw ShapeError("encode_global: expected a vector, got " + to_string(context.shape()));
  const auto& batch = reshape(tape, context, {1, context.numel()});
  const auto& encoded = encoder.forward(tape, batch, mode, dropout_spec);
  return reshape(tape, encoded, {encoded.dim(1)});
}

template <typename T>
const Tensor<T>& encode_faces(Tape<T>& tape, const Encoder<T>& encoder, const Tensor<T>& faces,
                              Mode mode, DropoutSpec dropout_spec) {
  if (faces.rank() != 2) throw ShapeError("encode_faces: expected [n, d] faces, got " + to_string(faces.shape()));
  if (faces.dim(0) == 0) throw ShapeError("encode_faces: at least one face is required");
  return encoder.forward(tape, faces, mode, dropout_spec);
}

template class Encoder<float>;
template class Encoder<double>;
template const Tensor<float>& encode_global(Tape<float>&, const Encoder<float>&, const Tensor<float>&, Mode, DropoutSpec);
template const Tensor<double>& encode_global(Tape<double>&, const Encoder<double>&, const Tensor<double>&, Mode, DropoutSpec);
template const Tensor<float>& encode_faces(Tape<float>&, const Encoder<float>&, const Tensor<float>&, Mode, DropoutSpec);
template const Tensor<double>& encode_faces(Tape<double>&, const Encoder<double>&, const Tensor<double>&, Mode, DropoutSpec);

}  // namespace gemr
