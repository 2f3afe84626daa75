#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gemr/ops.hpp"
#include "gemr/rng.hpp"
#include "gemr/tensor.hpp"

namespace gemr {

/// How a variable-size set of face features is reduced to one vector.
///
///  Average     column mean, uniform weights.
///  AttentionA  softmax over dot(face_i, g), g the global feature (needs D_g == D_f).
///  AttentionB  as A, with g first mapped to D_f by an intermediate dense layer.
///  AttentionC  softmax over scores from a per-face two-layer scorer (D_f -> 64 -> 1).
enum class Mechanism { Average, AttentionA, AttentionB, AttentionC };

inline constexpr Mechanism kAllMechanisms[] = {Mechanism::Average, Mechanism::AttentionA,
                                               Mechanism::AttentionB, Mechanism::AttentionC};

/// "average", "a", "b", "c"
std::string_view mechanism_name(Mechanism m);
/// Accepts the short names above; throws std::invalid_argument otherwise.
Mechanism parse_mechanism(std::string_view name);

struct AttentionOptions {
  /// Divide dot-product scores by sqrt(D_f).
  bool scaled = false;
  /// Rectified-linear activation on the Attention-B intermediate layer.
  bool projection_relu = false;

  friend bool operator==(const AttentionOptions&, const AttentionOptions&) = default;
};

/// Per-face probabilities produced by a pooling mechanism.
struct AttentionWeights {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  /// Index of the largest weight; ties go to the lowest index.
  std::size_t most_important() const;
};

template <typename T>
struct IntermediateProjection {
  Tensor<T> weight;  // [D_f, D_g]
  Tensor<T> bias;    // [D_f]

  static IntermediateProjection init(std::size_t global_dim, std::size_t face_dim, Philox& rng);
};

template <typename T>
struct ScorerParams {
  static constexpr std::size_t kHidden = 64;

  Tensor<T> hidden_weight;  // [64, D_f]
  Tensor<T> hidden_bias;    // [64]
  Tensor<T> out_weight;     // [1, 64]
  Tensor<T> out_bias;       // [1]

  static ScorerParams init(std::size_t face_dim, Philox& rng, std::size_t hidden = kHidden);
};

/// Result of pooling; both tensors live on the tape that produced them.
template <typename T>
struct Pooled {
  const Tensor<T>* pooled;   // [D_f]
  const Tensor<T>* weights;  // [n]

  AttentionWeights attention() const;
};

template <typename T>
Pooled<T> pool_average(Tape<T>& tape, const Tensor<T>& faces);

template <typename T>
Pooled<T> pool_attention_a(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>& context,
                           const AttentionOptions& options = {});

template <typename T>
Pooled<T> pool_attention_b(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>& context,
                           const IntermediateProjection<T>& projection,
                           const AttentionOptions& options = {});

template <typename T>
Pooled<T> pool_attention_c(Tape<T>& tape, const Tensor<T>& faces, const ScorerParams<T>& scorer);

/// A mechanism together with the parameters it owns.
template <typename T>
struct PoolingMechanism {
  Mechanism variant = Mechanism::Average;
  AttentionOptions options;
  std::optional<IntermediateProjection<T>> projection;  // AttentionB only
  std::optional<ScorerParams<T>> scorer;                // AttentionC only

  static PoolingMechanism make(Mechanism variant, std::size_t global_dim, std::size_t face_dim,
                               Philox& rng, AttentionOptions options = {});

  template <typename U>
  PoolingMechanism<U> cast() const;
};

/// Dispatches on `mechanism.variant`. A and B need a context vector and
/// reject a null one; Average and C ignore it.
template <typename T>
Pooled<T> pool(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>* context,
               const PoolingMechanism<T>& mechanism);

template <typename T>
template <typename U>
PoolingMechanism<U> PoolingMechanism<T>::cast() const {
  PoolingMechanism<U> out;
  out.variant = variant;
  out.options = options;
  if (projection) out.projection = IntermediateProjection<U>{tensor_cast<U>(projection->weight), tensor_cast<U>(projection->bias)};
  if (scorer) {
    out.scorer = ScorerParams<U>{tensor_cast<U>(scorer->hidden_weight), tensor_cast<U>(scorer->hidden_bias),
                                 tensor_cast<U>(scorer->out_weight), tensor_cast<U>(scorer->out_bias)};
  }
  return out;
}

}  // namespace gemr
