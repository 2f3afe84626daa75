#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gemr/rng.hpp"
#include "gemr/sample.hpp"

namespace gemr {

/// Planted-salience generator parameters.
///
/// Each sample has a uniform label y and n faces (n uniform in
/// [faces_min, faces_max]). One uniformly chosen face is dominant: its
/// feature part is signal * c_y plus N(0, noise) per coordinate and its
/// trailing salience value is salience_gap plus N(0, salience_noise).
/// Every other face carries distractor * c_y' for an independently uniform
/// (often conflicting) class y', salience N(0, salience_noise), and the
/// same feature noise. c_0..c_2 are fixed orthonormal prototypes.
///
/// The global vector is global_strength * h_y plus context_mix times the
/// dominant face's prototype coordinates embedded along fixed directions
/// e_0..e_2, plus N(0, global_noise) per coordinate. h and e are fixed
/// orthonormal directions of the global space.
struct DatasetConfig {
  std::size_t n_train = 4000;
  std::size_t n_val = 1000;
  std::size_t n_eval = 1000;
  std::size_t faces_min = 1;
  std::size_t faces_max = 8;
  std::size_t global_dim = 64;
  std::size_t face_dim = 32;  // stored faces have face_dim + 1 values (salience last)
  // Amplitudes are kept small so unscaled dot-product attention starts near
  // uniform; the oracle is unchanged by a common rescale of these values.
  double signal = 0.9;
  double distractor = 0.45;
  double salience_gap = 0.6;
  double noise = 0.3;
  double salience_noise = 0.09;
  double global_strength = 0.45;
  double context_mix = 1.0;
  double global_noise = 0.9;
  std::uint64_t seed = 0;

  std::size_t face_record_dim() const { return face_dim + 1; }
  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct Dataset {
  Partition train;
  Partition val;
  Partition eval;
};

/// Fixed prototype directions shared by every configuration.
struct Prototypes {
  std::array<std::vector<double>, kNumClasses> face;     // c_k, length face_dim
  std::array<std::vector<double>, kNumClasses> label;    // h_k, length global_dim
  std::array<std::vector<double>, kNumClasses> context;  // e_k, length global_dim, orthogonal to h
};

Prototypes make_prototypes(std::size_t face_dim, std::size_t global_dim);

/// Sample `index` (0-based over train, then val, then eval) of the dataset
/// defined by `config`. Each index draws from its own Philox stream, so the
/// result does not depend on generation order.
GroupSample generate_sample(const DatasetConfig& config, const Prototypes& prototypes, std::uint64_t seed,
                            std::uint64_t index, std::string id);

Dataset generate_dataset(const DatasetConfig& config);

struct OracleEstimate {
  double accuracy = 0.0;
  double half_width = 0.0;  // 95% normal-approximation interval
  std::size_t trials = 0;
};

/// Monte-Carlo accuracy of the rule "take the max-salience face, predict the
/// prototype with the largest inner product". Needs n_mc >= 1000.
OracleEstimate bayes_oracle_accuracy(const DatasetConfig& config, std::size_t n_mc);

/// Rule used by the oracle, exposed for diagnostics.
Label oracle_predict(const GroupSample& sample, const Prototypes& prototypes);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// One JSON object per line: {"id": str, "label": int, "global": [num],
// "faces": [[num]], "dominant": int (optional)}.
std::string format_record(const GroupSample& sample);
GroupSample parse_record(const std::string& line, std::size_t line_number, std::vector<std::string>* warnings = nullptr);

void write_partition(const Partition& partition, const std::filesystem::path& path);
/// Blank lines are skipped; unknown fields produce a warning and are ignored.
Partition read_partition(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Writes train.jsonl, val.jsonl, eval.jsonl and meta.json into `dir`.
void write_dataset(const Dataset& dataset, const DatasetConfig& config, const std::filesystem::path& dir);

}  // namespace gemr
