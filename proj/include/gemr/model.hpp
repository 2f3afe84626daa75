#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gemr/attention.hpp"
#include "gemr/encoders.hpp"
#include "gemr/ops.hpp"
#include "gemr/sample.hpp"
#include "gemr/tensor.hpp"

namespace gemr {

struct ModelConfig {
  EncoderConfig global{64, {}, 256};
  EncoderConfig local{33, {}, 256};
  Mechanism mechanism = Mechanism::AttentionC;
  AttentionOptions attention;
  double dropout = 0.5;

  /// 256-d global and face features; Attention B uses 64-d face features.
  static ModelConfig defaults_for(Mechanism mechanism, std::size_t global_input = 64,
                                  std::size_t face_input = 33);

  std::size_t global_dim() const { return global.output_dim; }
  std::size_t face_dim() const { return local.output_dim; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ClassProbs {
  std::array<double, kNumClasses> probs{};
};

/// Two-branch classifier: global encoder and shared face encoder, one pooling
/// mechanism over the encoded faces, batch norm on each branch, concatenation,
/// dropout, a linear layer to three logits and softmax.
template <typename T>
class GroupEmotionModel {
 public:
  struct NamedTensor {
    std::string name;
    Tensor<T>* tensor;
    bool trainable;
  };

  struct BatchOutput {
    const Tensor<T>* logits;     // [B, 3]
    std::vector<Pooled<T>> pooled;
    const Tensor<T>* global_features;  // [B, D_g], batch-norm input
    const Tensor<T>* face_features;    // [B, D_f] pooled, batch-norm input
  };

  GroupEmotionModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Mechanism mechanism() const { return config_.mechanism; }

  /// Batched forward pass. Train mode needs >= 2 samples (batch norm) and a
  /// dropout generator; eval mode leaves the model untouched.
  BatchOutput forward_batch(Tape<T>& tape, std::span<const GroupSample* const> batch, Mode mode,
                            Philox* dropout_rng = nullptr);
  /// Eval-mode forward on a read-only model.
  BatchOutput infer_batch(Tape<T>& tape, std::span<const GroupSample* const> batch) const;

  /// Every tensor in checkpoint order: trainable parameters and batch-norm
  /// running statistics.
  std::vector<NamedTensor> named_tensors();
  std::vector<Tensor<T>*> parameters();
  void zero_grad();

  /// Throws ShapeError when the sample does not fit this model.
  void check_sample(const GroupSample& sample) const;

  template <typename U>
  GroupEmotionModel<U> cast() const;

 private:
  GroupEmotionModel() = default;

  template <typename Self>
  static BatchOutput run(Self& self, Tape<T>& tape, std::span<const GroupSample* const> batch, Mode mode,
                         Philox* dropout_rng);

  ModelConfig config_;
  Encoder<T> global_;
  Encoder<T> local_;
  PoolingMechanism<T> pooling_;
  BatchNormParams<T> bn_global_{1};
  BatchNormParams<T> bn_local_{1};
  DenseLayer<T> classifier_;

  template <typename U>
  friend class GroupEmotionModel;
};

/// Single-sample forward: class probabilities and the face attention weights.
template <typename T>
std::pair<ClassProbs, AttentionWeights> forward(const GroupSample& sample, GroupEmotionModel<T>& model,
                                                Mode mode, Philox* dropout_rng = nullptr);

/// Cross-entropy of the true label, clamped at probability 1e-12.
double loss(const ClassProbs& probs, Label label);

/// Argmax; ties go to the lowest class index.
Label predict(const ClassProbs& probs);

/// Eval-mode probabilities and attention weights for a whole partition.
std::vector<std::pair<ClassProbs, AttentionWeights>> infer_partition(const GroupEmotionModel<float>& model,
                                                                     const Partition& partition,
                                                                     std::size_t batch_size = 256);

/// Component-wise mean of the members' eval-mode probabilities.
ClassProbs ensemble_predict(std::span<const GroupEmotionModel<float>* const> models, const GroupSample& sample);
std::vector<ClassProbs> ensemble_predict(std::span<const GroupEmotionModel<float>* const> models,
                                         const Partition& partition);

template <typename T>
template <typename U>
GroupEmotionModel<U> GroupEmotionModel<T>::cast() const {
  GroupEmotionModel<U> out;
  out.config_ = config_;
  out.global_ = global_.template cast<U>();
  out.local_ = local_.template cast<U>();
  out.pooling_ = pooling_.template cast<U>();
  auto cast_bn = [](const BatchNormParams<T>& bn) {
    BatchNormParams<U> r(bn.features());
    r.gamma = tensor_cast<U>(bn.gamma);
    r.beta = tensor_cast<U>(bn.beta);
    r.running_mean = tensor_cast<U>(bn.running_mean);
    r.running_var = tensor_cast<U>(bn.running_var);
    return r;
  };
  out.bn_global_ = cast_bn(bn_global_);
  out.bn_local_ = cast_bn(bn_local_);
  out.classifier_ = {tensor_cast<U>(classifier_.weight), tensor_cast<U>(classifier_.bias)};
  return out;
}

extern template class GroupEmotionModel<float>;
extern template class GroupEmotionModel<double>;

}  // namespace gemr
