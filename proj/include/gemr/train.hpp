#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gemr/attention.hpp"
#include "gemr/model.hpp"
#include "gemr/sample.hpp"

namespace gemr {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr0 = 0.001;
  double decay_factor = 10.0;
  std::size_t decay_period = 9;
  std::size_t epochs = 27;
  double momentum = 0.9;  // 0 gives plain SGD
  double dropout = 0.5;
  std::uint64_t seed = 0;
  Mechanism mechanism = Mechanism::AttentionC;
  bool merge_val = false;  // train on train + val

  /// Throws std::invalid_argument.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr0 * decay_factor^-floor(epoch / decay_period). Epochs are 0-based, so the
/// first decay takes effect entering epoch decay_period.
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;                 // mean per-sample training loss
  std::optional<double> val_accuracy;
  std::size_t dropped = 0;           // samples left out by the size-1 batch rule
};

std::string format_epoch_log(const EpochLog& log);

using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;  // [true][predicted]

struct Metrics {
  Confusion confusion{};
  std::array<std::optional<double>, kNumClasses> per_class{};  // indexed by label; empty when no support
  double overall = 0.0;
  std::size_t total = 0;
};

/// Throws std::invalid_argument on an all-zero matrix.
Metrics compute_metrics(const Confusion& confusion);

/// Table with columns Positive, Neutral, Negative, Overall (percent).
std::string format_report(const Metrics& metrics);
/// One-line JSON record of the same numbers plus the confusion matrix.
std::string format_metrics_record(const Metrics& metrics);

/// Eval-mode accuracy report. Throws std::invalid_argument on an empty
/// partition.
Metrics evaluate(const GroupEmotionModel<float>& model, const Partition& partition);
Metrics score_predictions(const Partition& partition, const std::vector<Label>& predictions);

/// Model configuration implied by a training configuration and data dims.
ModelConfig model_config_for(const TrainConfig& config, std::size_t global_input, std::size_t face_input);

struct TrainResult {
  std::vector<EpochLog> log;
};

/// Seeded mini-batch SGD with momentum. Parameters are initialised from the
/// seed by the model constructor; shuffling and dropout use separate streams
/// of the same seed. `val` may be null. `on_epoch` is called after every
/// epoch. Throws std::invalid_argument on an empty training partition.
TrainResult train(GroupEmotionModel<float>& model, const Partition& train_set, const TrainConfig& config,
                  const Partition* val = nullptr, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace gemr
