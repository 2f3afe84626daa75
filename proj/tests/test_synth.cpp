#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "gemr/json_io.hpp"
#include "gemr/synth.hpp"

using namespace gemr;

namespace {

DatasetConfig tiny_config(std::uint64_t seed = 3) {
  DatasetConfig c;
  c.n_train = 40;
  c.n_val = 10;
  c.n_eval = 10;
  c.seed = seed;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gemr_synth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST(Prototypes, Orthonormal) {
  const auto p = make_prototypes(32, 64);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      EXPECT_NEAR(dot(p.face[i], p.face[j]), want, 1e-12);
      EXPECT_NEAR(dot(p.label[i], p.label[j]), want, 1e-12);
      EXPECT_NEAR(dot(p.context[i], p.context[j]), want, 1e-12);
      EXPECT_NEAR(dot(p.label[i], p.context[j]), 0.0, 1e-12);
    }
  }
}

TEST(Generator, ShapesAndFaceCounts) {
  const auto d = generate_dataset(tiny_config());
  EXPECT_EQ(d.train.size(), 40u);
  EXPECT_EQ(d.val.size(), 10u);
  EXPECT_EQ(d.eval.size(), 10u);
  for (const auto& s : d.train) {
    EXPECT_EQ(s.global.size(), 64u);
    EXPECT_GE(s.faces.size(), 1u);
    EXPECT_LE(s.faces.size(), 8u);
    for (const auto& f : s.faces) EXPECT_EQ(f.size(), 33u);
    ASSERT_TRUE(s.dominant.has_value());
    EXPECT_LT(*s.dominant, s.faces.size());
  }
}

TEST(Generator, DeterministicAndSeedSensitive) {
  const auto a = generate_dataset(tiny_config(5)), b = generate_dataset(tiny_config(5)),
             c = generate_dataset(tiny_config(6));
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.eval, b.eval);
  EXPECT_NE(a.train, c.train);
}

TEST(Generator, SampleIndependentOfGenerationOrder) {
  const auto cfg = tiny_config(7);
  const auto d = generate_dataset(cfg);
  const auto protos = make_prototypes(cfg.face_dim, cfg.global_dim);
  const auto s = generate_sample(cfg, protos, cfg.seed, 45, d.val[5].id);
  EXPECT_EQ(s, d.val[5]);
}

TEST(Generator, PartitionsAreDisjoint) {
  const auto d = generate_dataset(tiny_config());
  std::set<std::string> ids;
  for (const auto* part : {&d.train, &d.val, &d.eval})
    for (const auto& s : *part) EXPECT_TRUE(ids.insert(s.id).second) << s.id;
}

TEST(Generator, WrittenFilesAreByteIdentical) {
  const auto cfg = tiny_config(8);
  const auto a = scratch_dir("a"), b = scratch_dir("b");
  write_dataset(generate_dataset(cfg), cfg, a);
  write_dataset(generate_dataset(cfg), cfg, b);
  for (const char* f : {"train.jsonl", "val.jsonl", "eval.jsonl", "meta.json"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Generator, ClassFrequenciesAreBalanced) {
  auto cfg = tiny_config(9);
  cfg.n_train = 9999;
  const auto d = generate_dataset(cfg);
  std::array<std::size_t, 3> counts{};
  for (const auto& s : d.train) ++counts[index_of(s.label)];
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c) / 9999.0, 1.0 / 3.0, 0.03);
}

TEST(Generator, DominantFaceRecoverableBySalience) {
  DatasetConfig cfg;
  cfg.n_val = 1;
  cfg.n_eval = 1;
  const auto d = generate_dataset(cfg);
  std::size_t hits = 0;
  for (const auto& s : d.train) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.faces.size(); ++i)
      if (s.faces[i].back() > s.faces[best].back()) best = i;
    hits += best == *s.dominant;
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(d.train.size()), 0.99);
}

TEST(Generator, NoiselessLimitIsSolvedByTheOracleRule) {
  auto cfg = tiny_config(10);
  cfg.noise = 1e-9;
  cfg.salience_noise = 1e-9;
  const auto d = generate_dataset(cfg);
  const auto protos = make_prototypes(cfg.face_dim, cfg.global_dim);
  for (const auto& s : d.train) EXPECT_EQ(oracle_predict(s, protos), s.label);
  EXPECT_DOUBLE_EQ(bayes_oracle_accuracy(cfg, 2000).accuracy, 1.0);
}

// Closed forms for the oracle rule: with p = P(argmax over 3 prototypes is
// right | signal / noise) and q_n = P(dominant has the top salience among n),
// accuracy = mean over n of q_n p + (1 - q_n) / 3. Values come from
// quadrature of the standard normal integrals.
TEST(Oracle, MonteCarloMatchesClosedFormAtDefaults) {
  const auto est = bayes_oracle_accuracy(DatasetConfig{}, 100000);
  EXPECT_EQ(est.trials, 100000u);
  EXPECT_GT(est.half_width, 0.0);
  EXPECT_LT(est.half_width, 0.002);
  EXPECT_NEAR(est.accuracy, 0.968793, est.half_width);
}

TEST(Oracle, MonteCarloMatchesClosedFormWithoutSalienceGap) {
  DatasetConfig cfg;
  cfg.distractor = cfg.signal;
  cfg.salience_gap = 0.0;
  const auto est = bayes_oracle_accuracy(cfg, 100000);
  EXPECT_NEAR(est.accuracy, 0.549220, est.half_width);
}

TEST(Oracle, NeedsEnoughTrials) {
  EXPECT_THROW(bayes_oracle_accuracy(DatasetConfig{}, 999), std::invalid_argument);
}

TEST(DatasetConfig, Validation) {
  auto bad = [](auto mutate) {
    DatasetConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](DatasetConfig& c) { c.faces_min = 0; });
  bad([](DatasetConfig& c) { c.faces_max = 0; });
  bad([](DatasetConfig& c) { c.face_dim = 2; });
  bad([](DatasetConfig& c) { c.global_dim = 5; });
  bad([](DatasetConfig& c) { c.signal = 0.0; });
  bad([](DatasetConfig& c) { c.distractor = 2.0; });
  bad([](DatasetConfig& c) { c.noise = 0.0; });
  bad([](DatasetConfig& c) { c.global_noise = -1.0; });
  bad([](DatasetConfig& c) { c.salience_gap = NAN; });
  DatasetConfig ok;
  ok.distractor = ok.signal;
  EXPECT_NO_THROW(ok.validate());
}

TEST(DatasetConfig, JsonRoundTripAndUnknownKeys) {
  auto cfg = tiny_config(11);
  cfg.noise = 0.25;
  const nlohmann::json j = cfg;
  EXPECT_EQ(j.get<DatasetConfig>(), cfg);
  auto partial = nlohmann::json::parse(R"({"seed": 4})");
  EXPECT_EQ(partial.get<DatasetConfig>().seed, 4u);
  EXPECT_EQ(partial.get<DatasetConfig>().n_train, DatasetConfig{}.n_train);
  EXPECT_ANY_THROW(nlohmann::json::parse(R"({"sede": 4})").get<DatasetConfig>());
}

TEST(Jsonl, RecordRoundTripIsLossless) {
  const auto d = generate_dataset(tiny_config(12));
  for (const auto& s : d.train) EXPECT_EQ(parse_record(format_record(s), 1), s);
  const auto dir = scratch_dir("rt");
  write_partition(d.val, dir / "val.jsonl");
  EXPECT_EQ(read_partition(dir / "val.jsonl"), d.val);
  std::filesystem::remove_all(dir);
}

TEST(Jsonl, ErrorsNameTheLine) {
  const auto dir = scratch_dir("bad");
  const auto good = format_record(generate_dataset(tiny_config(13)).train[0]);
  {
    std::ofstream out(dir / "p.jsonl");
    out << good << "\n\n" << R"({"id": "x", "global": [1], "faces": [[1]]})" << "\n";
  }
  try {
    read_partition(dir / "p.jsonl");
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Jsonl, MalformedRecords) {
  auto line_of = [](const std::string& text) {
    try {
      parse_record(text, 7);
    } catch (const DatasetError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("{not json"), 7u);
  EXPECT_EQ(line_of("[1, 2]"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 4, "global": [1], "faces": [[1]]})"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 1.5, "global": [1], "faces": [[1]]})"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 1, "global": [1], "faces": []})"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 1, "global": "a", "faces": [[1]]})"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 1, "global": [1], "faces": [[1]], "dominant": 3})"), 7u);
  EXPECT_EQ(line_of(R"({"id": "x", "label": 1, "global": [1], "faces": [[1]]})"), 0u);
}

TEST(Jsonl, EmptyFileAndUnknownFields) {
  const auto dir = scratch_dir("empty");
  { std::ofstream out(dir / "e.jsonl"); }
  EXPECT_TRUE(read_partition(dir / "e.jsonl").empty());
  {
    std::ofstream out(dir / "u.jsonl");
    out << R"({"id": "x", "label": 2, "global": [1], "faces": [[1, 2]], "camera": "a"})" << "\n";
  }
  std::vector<std::string> warnings;
  const auto p = read_partition(dir / "u.jsonl", &warnings);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].label, Label::Positive);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("camera"), std::string::npos);
  EXPECT_THROW(read_partition(dir / "missing.jsonl"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
