#include "gemr/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace gemr {

ModelConfig ModelConfig::defaults_for(Mechanism mechanism, std::size_t global_input, std::size_t face_input) {
  ModelConfig c;
  c.mechanism = mechanism;
  c.global = {global_input, {}, 256};
  c.local = {face_input, {}, mechanism == Mechanism::AttentionB ? std::size_t{64} : std::size_t{256}};
  return c;
}

void ModelConfig::validate() const {
  global.validate();
  local.validate();
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (mechanism == Mechanism::AttentionA && global_dim() != face_dim()) {
    throw std::invalid_argument("attention A needs equal global and face feature dimensions");
  }
}

template <typename T>
GroupEmotionModel<T>::GroupEmotionModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), bn_global_(config_.global_dim()), bn_local_(config_.face_dim()) {
  config_.validate();
  Philox rng(seed, 0);
  global_ = Encoder<T>(config_.global, rng);
  local_ = Encoder<T>(config_.local, rng);
  pooling_ = PoolingMechanism<T>::make(config_.mechanism, config_.global_dim(), config_.face_dim(), rng,
                                       config_.attention);
  const std::size_t fused = config_.global_dim() + config_.face_dim();
  const double limit = std::sqrt(6.0 / static_cast<double>(fused + kNumClasses));
  std::vector<T> w(kNumClasses * fused);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
  classifier_ = {Tensor<T>({kNumClasses, fused}, std::move(w), true), Tensor<T>({kNumClasses}, true)};
}

template <typename T>
void GroupEmotionModel<T>::check_sample(const GroupSample& s) const {
  if (s.faces.empty()) throw ShapeError("sample '" + s.id + "' has no faces");
  if (s.global.size() != config_.global.input_dim) {
    throw ShapeError("sample '" + s.id + "': global vector has " + std::to_string(s.global.size()) +
                     " values, model expects " + std::to_string(config_.global.input_dim));
  }
  for (const auto& f : s.faces) {
    if (f.size() != config_.local.input_dim) {
      throw ShapeError("sample '" + s.id + "': face vector has " + std::to_string(f.size()) +
                       " values, model expects " + std::to_string(config_.local.input_dim));
    }
  }
}

template <typename T>
template <typename Self>
typename GroupEmotionModel<T>::BatchOutput GroupEmotionModel<T>::run(Self& self, Tape<T>& tape,
                                                                     std::span<const GroupSample* const> batch,
                                                                     Mode mode, Philox* dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  const auto& cfg = self.config_;
  std::size_t total_faces = 0;
  for (const auto* s : batch) {
    self.check_sample(*s);
    total_faces += s->faces.size();
  }
  const bool use_dropout = mode == Mode::Train && cfg.dropout > 0.0;
  if (use_dropout && !dropout_rng) throw std::invalid_argument("forward: train-mode dropout needs a generator");
  const DropoutSpec drop{use_dropout ? cfg.dropout : 0.0, dropout_rng};

  const std::size_t b = batch.size();
  Tensor<T> globals({b, cfg.global.input_dim});
  Tensor<T> faces({total_faces, cfg.local.input_dim});
  std::size_t r = 0;
  for (std::size_t i = 0; i < b; ++i) {
    std::copy(batch[i]->global.begin(), batch[i]->global.end(), globals.data().begin() + static_cast<std::ptrdiff_t>(i * cfg.global.input_dim));
    for (const auto& f : batch[i]->faces) {
      std::copy(f.begin(), f.end(), faces.data().begin() + static_cast<std::ptrdiff_t>(r * cfg.local.input_dim));
      ++r;
    }
  }
  const auto& global_in = tape.hold(std::move(globals));
  const auto& face_in = tape.hold(std::move(faces));

  const auto& g = self.global_.forward(tape, global_in, mode, drop);
  const auto& f = self.local_.forward(tape, face_in, mode, drop);

  const bool needs_context = cfg.mechanism == Mechanism::AttentionA || cfg.mechanism == Mechanism::AttentionB;
  BatchOutput result;
  result.pooled.reserve(b);
  std::vector<const Tensor<T>*> rows;
  rows.reserve(b);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t n = batch[i]->faces.size();
    const auto& own = slice_rows(tape, f, offset, n);
    const Tensor<T>* context = needs_context ? &row(tape, g, i) : nullptr;
    result.pooled.push_back(pool(tape, own, context, self.pooling_));
    rows.push_back(result.pooled.back().pooled);
    offset += n;
  }
  const auto& pooled = stack_rows(tape, std::span<const Tensor<T>* const>(rows));
  result.global_features = &g;
  result.face_features = &pooled;

  const Tensor<T>* gn;
  const Tensor<T>* pn;
  if constexpr (std::is_const_v<Self>) {
    gn = &batch_norm_eval(tape, g, self.bn_global_);
    pn = &batch_norm_eval(tape, pooled, self.bn_local_);
  } else {
    gn = &batch_norm(tape, g, self.bn_global_, mode);
    pn = &batch_norm(tape, pooled, self.bn_local_, mode);
  }
  const Tensor<T>* fused = &concat(tape, *gn, *pn);
  if (use_dropout) fused = &dropout(tape, *fused, cfg.dropout, mode, *dropout_rng);
  result.logits = &linear(tape, *fused, self.classifier_.weight, self.classifier_.bias);
  return result;
}

template <typename T>
typename GroupEmotionModel<T>::BatchOutput GroupEmotionModel<T>::forward_batch(
    Tape<T>& tape, std::span<const GroupSample* const> batch, Mode mode, Philox* dropout_rng) {
  return run(*this, tape, batch, mode, dropout_rng);
}

template <typename T>
typename GroupEmotionModel<T>::BatchOutput GroupEmotionModel<T>::infer_batch(
    Tape<T>& tape, std::span<const GroupSample* const> batch) const {
  return run(*this, tape, batch, Mode::Eval, nullptr);
}

template <typename T>
std::vector<typename GroupEmotionModel<T>::NamedTensor> GroupEmotionModel<T>::named_tensors() {
  std::vector<NamedTensor> out;
  auto add_encoder = [&out](const std::string& prefix, Encoder<T>& enc) {
    for (std::size_t i = 0; i < enc.layers().size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", &enc.layers()[i].weight, true});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", &enc.layers()[i].bias, true});
    }
  };
  add_encoder("global", global_);
  add_encoder("local", local_);
  if (pooling_.projection) {
    out.push_back({"pool.projection.weight", &pooling_.projection->weight, true});
    out.push_back({"pool.projection.bias", &pooling_.projection->bias, true});
  }
  if (pooling_.scorer) {
    out.push_back({"pool.scorer.0.weight", &pooling_.scorer->hidden_weight, true});
    out.push_back({"pool.scorer.0.bias", &pooling_.scorer->hidden_bias, true});
    out.push_back({"pool.scorer.1.weight", &pooling_.scorer->out_weight, true});
    out.push_back({"pool.scorer.1.bias", &pooling_.scorer->out_bias, true});
  }
  for (auto [prefix, bn] : {std::pair{"bn_global", &bn_global_}, std::pair{"bn_local", &bn_local_}}) {
    const std::string p(prefix);
    out.push_back({p + ".gamma", &bn->gamma, true});
    out.push_back({p + ".beta", &bn->beta, true});
    out.push_back({p + ".running_mean", &bn->running_mean, false});
    out.push_back({p + ".running_var", &bn->running_var, false});
  }
  out.push_back({"classifier.weight", &classifier_.weight, true});
  out.push_back({"classifier.bias", &classifier_.bias, true});
  return out;
}

template <typename T>
std::vector<Tensor<T>*> GroupEmotionModel<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& nt : named_tensors()) {
    if (nt.trainable) out.push_back(nt.tensor);
  }
  return out;
}

template <typename T>
void GroupEmotionModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::pair<ClassProbs, AttentionWeights> forward(const GroupSample& sample, GroupEmotionModel<T>& model, Mode mode,
                                                Philox* dropout_rng) {
  Tape<T> tape(false);
  const GroupSample* one[] = {&sample};
  auto out = model.forward_batch(tape, one, mode, dropout_rng);
  const auto& probs = softmax_rows(tape, *out.logits);
  ClassProbs cp;
  for (std::size_t c = 0; c < kNumClasses; ++c) cp.probs[c] = static_cast<double>(probs[c]);
  return {cp, out.pooled.front().attention()};
}

double loss(const ClassProbs& probs, Label label) {
  Tape<double> tape(false);
  const auto& p = tape.hold(Tensor<double>({kNumClasses}, std::vector<double>(probs.probs.begin(), probs.probs.end())));
  return cross_entropy(tape, p, index_of(label)).item();
}

Label predict(const ClassProbs& probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (probs.probs[c] > probs.probs[best]) best = c;
  }
  return static_cast<Label>(best);
}

std::vector<std::pair<ClassProbs, AttentionWeights>> infer_partition(const GroupEmotionModel<float>& model,
                                                                     const Partition& partition,
                                                                     std::size_t batch_size) {
  std::vector<std::pair<ClassProbs, AttentionWeights>> out;
  out.reserve(partition.size());
  std::vector<const GroupSample*> batch;
  for (std::size_t start = 0; start < partition.size(); start += batch_size) {
    const std::size_t end = std::min(partition.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(&partition[i]);
    Tape<float> tape(false);
    auto res = model.infer_batch(tape, batch);
    const auto& probs = softmax_rows(tape, *res.logits);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ClassProbs cp;
      for (std::size_t c = 0; c < kNumClasses; ++c) cp.probs[c] = static_cast<double>(probs.at(i, c));
      out.emplace_back(cp, res.pooled[i].attention());
    }
  }
  return out;
}

ClassProbs ensemble_predict(std::span<const GroupEmotionModel<float>* const> models, const GroupSample& sample) {
  Partition one{sample};
  return ensemble_predict(models, one).front();
}

std::vector<ClassProbs> ensemble_predict(std::span<const GroupEmotionModel<float>* const> models,
                                         const Partition& partition) {
  if (models.empty()) throw std::invalid_argument("ensemble_predict: no models");
  std::vector<ClassProbs> mean(partition.size());
  for (const auto* m : models) {
    const auto member = infer_partition(*m, partition);
    for (std::size_t i = 0; i < partition.size(); ++i)
      for (std::size_t c = 0; c < kNumClasses; ++c) mean[i].probs[c] += member[i].first.probs[c];
  }
  const double k = static_cast<double>(models.size());
  for (auto& cp : mean)
    for (auto& p : cp.probs) p /= k;
  return mean;
}

template class GroupEmotionModel<float>;
template class GroupEmotionModel<double>;
template std::pair<ClassProbs, AttentionWeights> forward(const GroupSample&, GroupEmotionModel<float>&, Mode, Philox*);
template std::pair<ClassProbs, AttentionWeights> forward(const GroupSample&, GroupEmotionModel<double>&, Mode, Philox*);

}  // namespace gemr
