#include "gemr/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gemr/rng.hpp"

namespace gemr {
namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

// Report column order.
constexpr Label kReportOrder[] = {Label::Positive, Label::Neutral, Label::Negative};

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (batch_size < 2) fail("batch_size must be at least 2 (batch norm)");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) fail("lr0 must be a finite non-negative number");
  if (!(decay_factor > 0.0)) fail("decay_factor must be positive");
  if (decay_period < 1) fail("decay_period must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  const auto steps = static_cast<double>(epoch / config.decay_period);
  return config.lr0 / std::pow(config.decay_factor, steps);
}

std::string format_epoch_log(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["lr"] = log.lr;
  j["loss"] = log.loss;
  j["val_acc"] = log.val_accuracy ? nlohmann::json(*log.val_accuracy) : nlohmann::json(nullptr);
  if (log.dropped) j["dropped"] = log.dropped;
  return j.dump();
}

Metrics compute_metrics(const Confusion& confusion) {
  Metrics m;
  m.confusion = confusion;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::size_t support = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) support += confusion[t][p];
    m.total += support;
    correct += confusion[t][t];
    if (support > 0) m.per_class[t] = static_cast<double>(confusion[t][t]) / static_cast<double>(support);
  }
  if (m.total == 0) throw std::invalid_argument("compute_metrics: confusion matrix is all zero");
  m.overall = static_cast<double>(correct) / static_cast<double>(m.total);
  return m;
}

std::string format_report(const Metrics& m) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s\n", "", "Positive", "Neutral", "Negative", "Overall");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s\n", "accuracy%", percent(m.per_class[index_of(kReportOrder[0])]).c_str(),
                percent(m.per_class[index_of(kReportOrder[1])]).c_str(),
                percent(m.per_class[index_of(kReportOrder[2])]).c_str(), percent(m.overall).c_str());
  out << buf;
  return out.str();
}

std::string format_metrics_record(const Metrics& m) {
  nlohmann::ordered_json j;
  for (auto label : kReportOrder) {
    const auto& v = m.per_class[index_of(label)];
    j[std::string(label_name(label))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("n/a");
  }
  j["overall"] = m.overall;
  j["total"] = m.total;
  j["confusion"] = m.confusion;
  return j.dump();
}

Metrics score_predictions(const Partition& partition, const std::vector<Label>& predictions) {
  if (partition.empty()) throw std::invalid_argument("evaluate: empty partition");
  if (predictions.size() != partition.size()) throw std::invalid_argument("evaluate: prediction count mismatch");
  Confusion c{};
  for (std::size_t i = 0; i < partition.size(); ++i) ++c[index_of(partition[i].label)][index_of(predictions[i])];
  return compute_metrics(c);
}

Metrics evaluate(const GroupEmotionModel<float>& model, const Partition& partition) {
  if (partition.empty()) throw std::invalid_argument("evaluate: empty partition");
  const auto out = infer_partition(model, partition);
  std::vector<Label> pred;
  pred.reserve(out.size());
  for (const auto& [probs, weights] : out) pred.push_back(predict(probs));
  return score_predictions(partition, pred);
}

ModelConfig model_config_for(const TrainConfig& config, std::size_t global_input, std::size_t face_input) {
  auto mc = ModelConfig::defaults_for(config.mechanism, global_input, face_input);
  mc.dropout = config.dropout;
  return mc;
}

TrainResult train(GroupEmotionModel<float>& model, const Partition& train_set, const TrainConfig& config,
                  const Partition* val, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training partition");
  for (const auto& s : train_set) model.check_sample(s);

  Philox shuffle_rng(config.seed, kShuffleStream);
  Philox dropout_rng(config.seed, kDropoutStream);
  const auto params = model.parameters();
  std::vector<std::vector<float>> velocity;
  velocity.reserve(params.size());
  for (auto* p : params) velocity.emplace_back(p->numel(), 0.0f);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const GroupSample*> batch;
  std::vector<std::size_t> labels;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto lr = static_cast<float>(lr_schedule(epoch, config));
    const auto mu = static_cast<float>(config.momentum);
    shuffle(order, shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_schedule(epoch, config);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start == 1) {
        log.dropped += 1;
        continue;
      }
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        labels.push_back(index_of(train_set[order[i]].label));
      }
      Tape<float> tape(true);
      model.zero_grad();
      auto out = model.forward_batch(tape, batch, Mode::Train, &dropout_rng);
      const auto& loss = softmax_cross_entropy(tape, *out.logits, labels);
      tape.backward(loss);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
      seen += batch.size();
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k]->data();
        const auto g = params[k]->grad().data();
        auto& v = velocity[k];
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = mu * v[i] + g[i];
          w[i] -= lr * v[i];
        }
      }
    }
    log.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    if (val && !val->empty()) log.val_accuracy = evaluate(model, *val).overall;
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
  }
  for (auto* p : params) p->clear_grad();
  return result;
}

}  // namespace gemr
