#include "gemr/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace gemr {
namespace {

template <typename T>
Tensor<T> glorot(std::size_t out, std::size_t in, Philox& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<T> w(out * in);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
  return Tensor<T>({out, in}, std::move(w), true);
}

template <typename T>
void check_faces(const char* op, const Tensor<T>& faces) {
  if (faces.rank() != 2) throw ShapeError(std::string(op) + ": faces must be [n, d], got " + to_string(faces.shape()));
  if (faces.dim(0) == 0) throw ShapeError(std::string(op) + ": at least one face is required");
}

template <typename T>
Pooled<T> attend(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>& query, const AttentionOptions& options) {
  if (query.rank() != 1 || query.dim(0) != faces.dim(1)) {
    throw ShapeError("attention: query " + to_string(query.shape()) + " does not match faces " +
                     to_string(faces.shape()));
  }
  const Tensor<T>* scores = &matvec(tape, faces, query);
  if (options.scaled) scores = &scale(tape, *scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(faces.dim(1)))));
  const auto& weights = softmax(tape, *scores);
  return {&weighted_row_sum(tape, weights, faces), &weights};
}

}  // namespace

std::string_view mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::Average: return "average";
    case Mechanism::AttentionA: return "a";
    case Mechanism::AttentionB: return "b";
    case Mechanism::AttentionC: return "c";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view name) {
  for (auto m : kAllMechanisms) {
    if (mechanism_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown mechanism '" + std::string(name) + "' (expected average|a|b|c)");
}

std::size_t AttentionWeights::most_important() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < weights.size(); ++i) {
    if (weights[i] > weights[best]) best = i;
  }
  return best;
}

template <typename T>
IntermediateProjection<T> IntermediateProjection<T>::init(std::size_t global_dim, std::size_t face_dim, Philox& rng) {
  return {glorot<T>(face_dim, global_dim, rng), Tensor<T>({face_dim}, true)};
}

template <typename T>
ScorerParams<T> ScorerParams<T>::init(std::size_t face_dim, Philox& rng, std::size_t hidden) {
  ScorerParams p{glorot<T>(hidden, face_dim, rng), Tensor<T>({hidden}, true), glorot<T>(1, hidden, rng),
                 Tensor<T>({1}, true)};
  return p;
}

template <typename T>
AttentionWeights Pooled<T>::attention() const {
  return {std::vector<double>(weights->data().begin(), weights->data().end())};
}

template <typename T>
Pooled<T> pool_average(Tape<T>& tape, const Tensor<T>& faces) {
  check_faces("pool_average", faces);
  const std::size_t n = faces.dim(0);
  auto& weights = tape.hold(Tensor<T>({n}, std::vector<T>(n, T(1) / static_cast<T>(n))));
  return {&mean_rows(tape, faces), &weights};
}

template <typename T>
Pooled<T> pool_attention_a(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>& context,
                           const AttentionOptions& options) {
  check_faces("pool_attention_a", faces);
  return attend(tape, faces, context, options);
}

template <typename T>
Pooled<T> pool_attention_b(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>& context,
                           const IntermediateProjection<T>& projection, const AttentionOptions& options) {
  check_faces("pool_attention_b", faces);
  if (context.rank() != 1 || projection.weight.rank() != 2 || context.dim(0) != projection.weight.dim(1)) {
    throw ShapeError("pool_attention_b: context " + to_string(context.shape()) + " does not match projection " +
                     to_string(projection.weight.shape()));
  }
  const auto& g = reshape(tape, context, {1, context.numel()});
  const Tensor<T>* q = &linear(tape, g, projection.weight, projection.bias);
  if (options.projection_relu) q = &relu(tape, *q);
  const auto& query = reshape(tape, *q, {q->dim(1)});
  return attend(tape, faces, query, options);
}

template <typename T>
Pooled<T> pool_attention_c(Tape<T>& tape, const Tensor<T>& faces, const ScorerParams<T>& scorer) {
  check_faces("pool_attention_c", faces);
  const auto& hidden = relu(tape, linear(tape, faces, scorer.hidden_weight, scorer.hidden_bias));
  const auto& scores = linear(tape, hidden, scorer.out_weight, scorer.out_bias);
  const auto& weights = softmax(tape, reshape(tape, scores, {faces.dim(0)}));
  return {&weighted_row_sum(tape, weights, faces), &weights};
}

template <typename T>
PoolingMechanism<T> PoolingMechanism<T>::make(Mechanism variant, std::size_t global_dim, std::size_t face_dim,
                                              Philox& rng, AttentionOptions options) {
  PoolingMechanism<T> m;
  m.variant = variant;
  m.options = options;
  if (variant == Mechanism::AttentionA && global_dim != face_dim) {
    throw std::invalid_argument("attention A needs equal global and face dimensions, got " +
                                std::to_string(global_dim) + " and " + std::to_string(face_dim));
  }
  if (variant == Mechanism::AttentionB) m.projection = IntermediateProjection<T>::init(global_dim, face_dim, rng);
  if (variant == Mechanism::AttentionC) m.scorer = ScorerParams<T>::init(face_dim, rng);
  return m;
}

template <typename T>
Pooled<T> pool(Tape<T>& tape, const Tensor<T>& faces, const Tensor<T>* context, const PoolingMechanism<T>& mechanism) {
  switch (mechanism.variant) {
    case Mechanism::Average:
      return pool_average(tape, faces);
    case Mechanism::AttentionA:
      if (!context) throw std::invalid_argument("pool: attention A requires a context vector");
      return pool_attention_a(tape, faces, *context, mechanism.options);
    case Mechanism::AttentionB:
      if (!context) throw std::invalid_argument("pool: attention B requires a context vector");
      if (!mechanism.projection) throw std::invalid_argument("pool: attention B has no projection");
      return pool_attention_b(tape, faces, *context, *mechanism.projection, mechanism.options);
    case Mechanism::AttentionC:
      if (!mechanism.scorer) throw std::invalid_argument("pool: attention C has no scorer");
      return pool_attention_c(tape, faces, *mechanism.scorer);
  }
  throw std::invalid_argument("pool: unknown mechanism");
}

#define GEMR_INSTANTIATE_ATTENTION(T)                                                                          \
  template struct IntermediateProjection<T>;                                                                   \
  template struct ScorerParams<T>;                                                                             \
  template struct Pooled<T>;                                                                                   \
  template struct PoolingMechanism<T>;                                                                         \
  template Pooled<T> pool_average(Tape<T>&, const Tensor<T>&);                                                 \
  template Pooled<T> pool_attention_a(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const AttentionOptions&);  \
  template Pooled<T> pool_attention_b(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                            \
                                      const IntermediateProjection<T>&, const AttentionOptions&);              \
  template Pooled<T> pool_attention_c(Tape<T>&, const Tensor<T>&, const ScorerParams<T>&);                     \
  template Pooled<T> pool(Tape<T>&, const Tensor<T>&, const Tensor<T>*, const PoolingMechanism<T>&);

GEMR_INSTANTIATE_ATTENTION(float)
GEMR_INSTANTIATE_ATTENTION(double)

}  // namespace gemr
