#include "gemr/synth.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "gemr/json_io.hpp"

namespace gemr {
namespace {

// Prototype directions come from their own key so they are identical for
// every dataset seed.
constexpr std::uint64_t kPrototypeKey = 0x6a09e667f3bcc908ull;
// Oracle Monte-Carlo draws live in a separate seed domain from the dataset.
constexpr std::uint64_t kOracleDomain = 0xbb67ae8584caa73bull;

std::vector<std::vector<double>> orthonormal(std::size_t count, std::size_t dim, Philox& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * b[i];
    }
    double norm = 0.0;
    for (auto x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

double dot(const std::vector<double>& a, const std::vector<float>& b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * static_cast<double>(b[i]);
  return s;
}

using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

}  // namespace

void DatasetConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("dataset config: " + m); };
  if (faces_min < 1 || faces_max < faces_min) fail("face count range must satisfy 1 <= min <= max");
  if (face_dim < kNumClasses) fail("face_dim must be at least 3");
  if (global_dim < 2 * kNumClasses) fail("global_dim must be at least 6");
  if (!(signal > 0.0)) fail("signal amplitude must be positive");
  if (!(distractor >= 0.0 && distractor <= signal)) fail("distractor amplitude must be in [0, signal]");
  if (!(noise > 0.0) || !(salience_noise > 0.0) || !(global_noise > 0.0)) fail("noise levels must be positive");
  if (!std::isfinite(salience_gap) || !std::isfinite(global_strength) || !std::isfinite(context_mix)) {
    fail("parameters must be finite");
  }
}

Prototypes make_prototypes(std::size_t face_dim, std::size_t global_dim) {
  Philox rng(kPrototypeKey, 0);
  Prototypes p;
  auto face = orthonormal(kNumClasses, face_dim, rng);
  auto global = orthonormal(2 * kNumClasses, global_dim, rng);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p.face[k] = std::move(face[k]);
    p.label[k] = std::move(global[k]);
    p.context[k] = std::move(global[kNumClasses + k]);
  }
  return p;
}

GroupSample generate_sample(const DatasetConfig& c, const Prototypes& protos, std::uint64_t seed,
                            std::uint64_t index, std::string id) {
  Philox rng(seed, index);
  GroupSample s;
  s.id = std::move(id);
  const auto y = rng.below(kNumClasses);
  s.label = static_cast<Label>(y);
  const auto n = c.faces_min + rng.below(static_cast<std::uint32_t>(c.faces_max - c.faces_min + 1));
  const auto d = rng.below(static_cast<std::uint32_t>(n));
  s.dominant = d;
  s.faces.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool dominant = i == d;
    const auto cls = dominant ? y : rng.below(kNumClasses);
    const double amp = dominant ? c.signal : c.distractor;
    auto& f = s.faces[i];
    f.resize(c.face_record_dim());
    for (std::size_t j = 0; j < c.face_dim; ++j) {
      f[j] = static_cast<float>(amp * protos.face[cls][j] + c.noise * rng.normal());
    }
    f[c.face_dim] = static_cast<float>((dominant ? c.salience_gap : 0.0) + c.salience_noise * rng.normal());
  }
  std::array<double, kNumClasses> coords{};
  for (std::size_t k = 0; k < kNumClasses; ++k) coords[k] = dot(protos.face[k], s.faces[d], c.face_dim);
  s.global.resize(c.global_dim);
  for (std::size_t j = 0; j < c.global_dim; ++j) {
    double v = c.global_strength * protos.label[y][j];
    for (std::size_t k = 0; k < kNumClasses; ++k) v += c.context_mix * coords[k] * protos.context[k][j];
    s.global[j] = static_cast<float>(v + c.global_noise * rng.normal());
  }
  return s;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  const auto protos = make_prototypes(config.face_dim, config.global_dim);
  Dataset ds;
  std::uint64_t index = 0;
  auto fill = [&](Partition& part, std::size_t count, const char* prefix) {
    part.reserve(count);
    for (std::size_t i = 0; i < count; ++i, ++index) {
      std::ostringstream id;
      id << prefix << '-' << std::setw(6) << std::setfill('0') << i;
      part.push_back(generate_sample(config, protos, config.seed, index, id.str()));
    }
  };
  fill(ds.train, config.n_train, "train");
  fill(ds.val, config.n_val, "val");
  fill(ds.eval, config.n_eval, "eval");
  return ds;
}

Label oracle_predict(const GroupSample& sample, const Prototypes& protos) {
  const std::size_t sal = protos.face[0].size();
  std::size_t best_face = 0;
  for (std::size_t i = 1; i < sample.faces.size(); ++i) {
    if (sample.faces[i][sal] > sample.faces[best_face][sal]) best_face = i;
  }
  std::size_t best = 0;
  double best_score = dot(protos.face[0], sample.faces[best_face], sal);
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    const double score = dot(protos.face[k], sample.faces[best_face], sal);
    if (score > best_score) {
      best = k;
      best_score = score;
    }
  }
  return static_cast<Label>(best);
}

OracleEstimate bayes_oracle_accuracy(const DatasetConfig& config, std::size_t n_mc) {
  if (n_mc < 1000) throw std::invalid_argument("bayes_oracle_accuracy: need at least 1000 trials");
  config.validate();
  const auto protos = make_prototypes(config.face_dim, config.global_dim);
  const std::uint64_t seed = config.seed ^ kOracleDomain;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const auto s = generate_sample(config, protos, seed, i, {});
    if (oracle_predict(s, protos) == s.label) ++correct;
  }
  OracleEstimate est;
  est.trials = n_mc;
  est.accuracy = static_cast<double>(correct) / static_cast<double>(n_mc);
  est.half_width = 1.96 * std::sqrt(est.accuracy * (1.0 - est.accuracy) / static_cast<double>(n_mc));
  return est;
}

std::string format_record(const GroupSample& s) {
  FloatJson j;
  j["id"] = s.id;
  j["label"] = static_cast<int>(s.label);
  j["global"] = s.global;
  j["faces"] = s.faces;
  if (s.dominant) j["dominant"] = *s.dominant;
  return j.dump();
}

GroupSample parse_record(const std::string& line, std::size_t line_number, std::vector<std::string>* warnings) {
  FloatJson j;
  try {
    j = FloatJson::parse(line);
  } catch (const FloatJson::parse_error& e) {
    throw DatasetError(line_number, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DatasetError(line_number, "record is not a JSON object");
  for (const char* field : {"id", "label", "global", "faces"}) {
    if (!j.contains(field)) throw DatasetError(line_number, std::string("missing field '") + field + "'");
  }
  GroupSample s;
  try {
    s.id = j.at("id").get<std::string>();
    if (!j.at("label").is_number_integer()) throw DatasetError(line_number, "field 'label' must be an integer");
    s.label = label_from_index(j.at("label").get<long long>());
    s.global = j.at("global").get<std::vector<float>>();
    s.faces = j.at("faces").get<std::vector<std::vector<float>>>();
    if (j.contains("dominant")) s.dominant = j.at("dominant").get<std::size_t>();
  } catch (const FloatJson::exception& e) {
    throw DatasetError(line_number, std::string("bad field type: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetError(line_number, e.what());
  }
  if (s.faces.empty()) throw DatasetError(line_number, "record has no faces");
  if (s.dominant && *s.dominant >= s.faces.size()) throw DatasetError(line_number, "dominant index out of range");
  if (warnings) {
    for (const auto& [key, value] : j.items()) {
      if (key != "id" && key != "label" && key != "global" && key != "faces" && key != "dominant") {
        warnings->push_back("line " + std::to_string(line_number) + ": unknown field '" + key + "' ignored");
      }
    }
  }
  return s;
}

void write_partition(const Partition& partition, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (const auto& s : partition) out << format_record(s) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Partition read_partition(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  Partition out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, number, warnings));
  }
  return out;
}

void write_dataset(const Dataset& ds, const DatasetConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_partition(ds.train, dir / "train.jsonl");
  write_partition(ds.val, dir / "val.jsonl");
  write_partition(ds.eval, dir / "eval.jsonl");
  std::ofstream meta(dir / "meta.json", std::ios::trunc);
  if (!meta) throw std::runtime_error("cannot write '" + (dir / "meta.json").string() + "'");
  nlohmann::json j = config;
  meta << j.dump(2) << '\n';
}

}  // namespace gemr
