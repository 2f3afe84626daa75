#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gemr/checkpoint.hpp"
#include "gemr/json_io.hpp"
#include "gemr/synth.hpp"
#include "gemr/train.hpp"

using namespace gemr;

namespace {

Partition labelled(const std::vector<int>& labels) {
  Partition p;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    GroupSample s;
    s.id = std::to_string(i);
    s.label = label_from_index(labels[i]);
    p.push_back(s);
  }
  return p;
}

std::vector<Label> as_labels(const std::vector<int>& v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(label_from_index(x));
  return out;
}

DatasetConfig toy_data(std::size_t n_train) {
  DatasetConfig c;
  c.n_train = n_train;
  c.n_val = 6;
  c.n_eval = 6;
  c.global_dim = 8;
  c.face_dim = 4;
  c.faces_max = 4;
  c.seed = 2;
  return c;
}

TrainConfig toy_train(Mechanism m) {
  TrainConfig t;
  t.mechanism = m;
  t.batch_size = 4;
  t.epochs = 3;
  t.lr0 = 0.05;
  t.dropout = 0.0;
  return t;
}

GroupEmotionModel<float> toy_model(const TrainConfig& t, const DatasetConfig& d) {
  auto cfg = model_config_for(t, d.global_dim, d.face_record_dim());
  cfg.global.output_dim = 8;
  cfg.local.output_dim = 8;
  return {cfg, t.seed};
}

std::vector<float> flatten(GroupEmotionModel<float>& model, bool trainable_only) {
  std::vector<float> out;
  for (auto& nt : model.named_tensors())
    if (nt.trainable || !trainable_only) out.insert(out.end(), nt.tensor->values().begin(), nt.tensor->values().end());
  return out;
}

}  // namespace

TEST(LrSchedule, StepDecay) {
  TrainConfig c;
  c.decay_period = 7;
  EXPECT_EQ(lr_schedule(0, c), 0.001);
  EXPECT_EQ(lr_schedule(6, c), 0.001);
  EXPECT_EQ(lr_schedule(7, c), 0.0001);
  EXPECT_EQ(lr_schedule(13, c), 0.0001);
  EXPECT_EQ(lr_schedule(14, c), 1e-5);
  c.decay_period = 9;
  EXPECT_EQ(lr_schedule(8, c), 0.001);
  EXPECT_EQ(lr_schedule(9, c), 0.0001);
  EXPECT_EQ(lr_schedule(26, c), 1e-5);
  c.decay_factor = 1.0;
  EXPECT_EQ(lr_schedule(26, c), 0.001);
}

TEST(TrainConfig, Validation) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](TrainConfig& c) { c.batch_size = 1; });
  bad([](TrainConfig& c) { c.lr0 = -1.0; });
  bad([](TrainConfig& c) { c.decay_period = 0; });
  bad([](TrainConfig& c) { c.decay_factor = 0.0; });
  bad([](TrainConfig& c) { c.dropout = 1.0; });
  bad([](TrainConfig& c) { c.momentum = 1.0; });
  EXPECT_NO_THROW(TrainConfig{}.validate());
  const nlohmann::json j = TrainConfig{};
  EXPECT_EQ(j.get<TrainConfig>(), TrainConfig{});
}

TEST(Metrics, Example) {
  const auto m = score_predictions(labelled({0, 0, 1, 2}), as_labels({0, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(*m.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*m.per_class[1], 1.0);
  EXPECT_DOUBLE_EQ(*m.per_class[2], 1.0);
  EXPECT_DOUBLE_EQ(m.overall, 0.75);
  EXPECT_EQ(m.total, 4u);
  EXPECT_EQ(m.confusion[0][1], 1u);
}

TEST(Metrics, UniformConfusion) {
  Confusion c;
  for (auto& row : c) row.fill(5);
  const auto m = compute_metrics(c);
  for (auto& p : m.per_class) EXPECT_NEAR(*p, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.overall, 1.0 / 3.0, 1e-12);
}

TEST(Metrics, MissingClassIsNotApplicable) {
  const auto m = score_predictions(labelled({2, 2, 1}), as_labels({2, 0, 1}));
  EXPECT_FALSE(m.per_class[0].has_value());
  const auto report = format_report(m);
  EXPECT_NE(report.find("n/a"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(format_metrics_record(m))["per_class"]["Negative"], nullptr);
}

TEST(Metrics, ReportColumnOrder) {
  const auto report = format_report(score_predictions(labelled({0, 1, 2}), as_labels({0, 1, 2})));
  const auto pos = report.find("Positive"), neu = report.find("Neutral"), neg = report.find("Negative"),
             all = report.find("Overall");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LT(pos, neu);
  EXPECT_LT(neu, neg);
  EXPECT_LT(neg, all);
}

TEST(Metrics, EmptyRejected) {
  EXPECT_THROW(compute_metrics(Confusion{}), std::invalid_argument);
  EXPECT_THROW(score_predictions(labelled({0}), {}), std::invalid_argument);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  const auto data = toy_data(10);
  auto t = toy_train(Mechanism::AttentionC);
  t.epochs = 0;
  auto model = toy_model(t, data);
  const auto before = flatten(model, false);
  const auto result = train(model, generate_dataset(data).train, t);
  EXPECT_TRUE(result.log.empty());
  EXPECT_EQ(flatten(model, false), before);
}

TEST(Train, ZeroLearningRateOnlyMovesRunningStatistics) {
  const auto data = toy_data(10);
  auto t = toy_train(Mechanism::AttentionB);
  t.lr0 = 0.0;
  auto model = toy_model(t, data);
  const auto trainable = flatten(model, true), all = flatten(model, false);
  train(model, generate_dataset(data).train, t);
  EXPECT_EQ(flatten(model, true), trainable);
  EXPECT_NE(flatten(model, false), all);
}

TEST(Train, LossDecreasesOnToySet) {
  const auto data = toy_data(10);
  const auto d = generate_dataset(data);
  for (auto m : kAllMechanisms) {
    auto t = toy_train(m);
    t.epochs = 30;
    t.batch_size = 5;
    auto model = toy_model(t, data);
    const auto result = train(model, d.train, t);
    ASSERT_EQ(result.log.size(), 30u);
    EXPECT_LT(result.log.back().loss, 0.5 * result.log.front().loss) << mechanism_name(m);
    for (const auto& e : result.log) EXPECT_TRUE(std::isfinite(e.loss));
  }
}

TEST(Train, SameSeedGivesIdenticalCheckpoints) {
  const auto data = toy_data(20);
  const auto d = generate_dataset(data);
  auto t = toy_train(Mechanism::AttentionC);
  t.dropout = 0.5;
  auto a = toy_model(t, data), b = toy_model(t, data);
  train(a, d.train, t, &d.val);
  train(b, d.train, t, &d.val);
  EXPECT_EQ(encode_checkpoint(a, {t.seed, t.epochs, ""}), encode_checkpoint(b, {t.seed, t.epochs, ""}));
  t.seed = 1;
  auto c = toy_model(toy_train(Mechanism::AttentionC), data);
  train(c, d.train, t, &d.val);
  EXPECT_NE(encode_checkpoint(a, {}), encode_checkpoint(c, {}));
}

TEST(Train, LogsScheduleValidationAndDroppedSamples) {
  const auto data = toy_data(9);
  const auto d = generate_dataset(data);
  auto t = toy_train(Mechanism::Average);
  t.decay_period = 2;
  auto model = toy_model(t, data);
  std::vector<EpochLog> seen;
  const auto result = train(model, d.train, t, &d.val, [&](const EpochLog& e) { seen.push_back(e); });
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[1].lr, lr_schedule(1, t));
  EXPECT_EQ(seen[2].lr, lr_schedule(2, t));
  for (const auto& e : seen) {
    EXPECT_EQ(e.dropped, 1u);  // 9 samples in batches of 4 leave one
    ASSERT_TRUE(e.val_accuracy.has_value());
  }
  const auto line = nlohmann::json::parse(format_epoch_log(seen[0]));
  EXPECT_EQ(line["epoch"], 0);
  EXPECT_THROW(train(model, Partition{}, t), std::invalid_argument);
}

TEST(Evaluate, AgreesWithPredictions) {
  const auto data = toy_data(10);
  const auto d = generate_dataset(data);
  const auto t = toy_train(Mechanism::AttentionA);
  auto model = toy_model(t, data);
  const auto m = evaluate(model, d.eval);
  std::vector<Label> predicted;
  for (const auto& s : d.eval) predicted.push_back(predict(forward(s, model, Mode::Eval).first));
  const auto ref = score_predictions(d.eval, predicted);
  EXPECT_EQ(m.confusion, ref.confusion);
  EXPECT_THROW(evaluate(model, Partition{}), std::invalid_argument);
}
