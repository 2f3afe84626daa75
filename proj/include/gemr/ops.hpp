#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gemr/rng.hpp"
#include "gemr/tensor.hpp"

namespace gemr {

// Differentiable primitives. Every op allocates its result on `tape`, checks
// operand shapes (ShapeError naming both shapes on mismatch) and, when any
// input requires grad, records a backward closure. Operands must outlive the
// tape.

/// a[m,k] x b[k,n] -> [m,n]
template <typename T>
Tensor<T>& matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// x[m,in], weight[out,in], bias[out] -> x * weight^T + bias, shape [m,out]
template <typename T>
Tensor<T>& linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                  const Tensor<T>& bias);

template <typename T>
Tensor<T>& add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T>& scale(Tape<T>& tape, const Tensor<T>& x, T factor);

template <typename T>
Tensor<T>& relu(Tape<T>& tape, const Tensor<T>& x);

/// Inner product of two equal-length vectors -> scalar {1}.
template <typename T>
Tensor<T>& dot(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// m[n,d] x v[d] -> [n]
template <typename T>
Tensor<T>& matvec(Tape<T>& tape, const Tensor<T>& m, const Tensor<T>& v);

/// Vectors: [p] ++ [q] -> [p+q]. Matrices: [r,p] ++ [r,q] -> [r,p+q].
template <typename T>
Tensor<T>& concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// sum_i w[i] * rows[i,:] for w[n], rows[n,d] -> [d]
template <typename T>
Tensor<T>& weighted_row_sum(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& rows);

/// Column-wise mean of rows[n,d] -> [d]
template <typename T>
Tensor<T>& mean_rows(Tape<T>& tape, const Tensor<T>& rows);

/// rows [begin, begin+count) of x[n,d] -> [count,d]
template <typename T>
Tensor<T>& slice_rows(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Row i of x[n,d] as a vector [d].
template <typename T>
Tensor<T>& row(Tape<T>& tape, const Tensor<T>& x, std::size_t i);

/// n vectors of length d -> [n,d]
template <typename T>
Tensor<T>& stack_rows(Tape<T>& tape, std::span<const Tensor<T>* const> rows);

/// Same payload, new shape with equal element count.
template <typename T>
Tensor<T>& reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

/// Sum of all elements -> scalar.
template <typename T>
Tensor<T>& sum(Tape<T>& tape, const Tensor<T>& x);

/// Max-subtracted softmax of a non-empty vector.
template <typename T>
Tensor<T>& softmax(Tape<T>& tape, const Tensor<T>& logits);

/// Row-wise softmax of logits[b,c].
template <typename T>
Tensor<T>& softmax_rows(Tape<T>& tape, const Tensor<T>& logits);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)) for a probability vector.
template <typename T>
Tensor<T>& cross_entropy(Tape<T>& tape, const Tensor<T>& probs, std::size_t label);

/// Mean over rows of -log softmax(logits[b,:])[labels[b]], computed through
/// log-sum-exp so it never overflows.
template <typename T>
Tensor<T>& softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                 std::span<const std::size_t> labels);

/// Affine parameters and running statistics of one batch-norm layer.
template <typename T>
struct BatchNormParams {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNormParams(std::size_t features);

  std::size_t features() const { return gamma.numel(); }

  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

/// Train mode normalises x[b,d] with the batch mean and population variance
/// (b >= 2 required) and folds them into the running statistics with
/// momentum 0.1. Eval mode uses the running statistics.
template <typename T>
Tensor<T>& batch_norm(Tape<T>& tape, const Tensor<T>& x, BatchNormParams<T>& params, Mode mode);

/// Eval-mode batch norm on read-only parameters.
template <typename T>
Tensor<T>& batch_norm_eval(Tape<T>& tape, const Tensor<T>& x, const BatchNormParams<T>& params);

/// Inverted dropout. Eval mode, or p == 0, is the identity; in train mode
/// each element survives with probability 1-p and is scaled by 1/(1-p).
template <typename T>
Tensor<T>& dropout(Tape<T>& tape, const Tensor<T>& x, double p, Mode mode, Philox& rng);

}  // namespace gemr
