#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gemr/model.hpp"

namespace gemr {

// Binary layout (".gemr"), all integers little-endian:
//
//   "GEMR"                     4 bytes magic
//   version                    u16 (= 1)
//   count                      u32 number of tensors
//   per tensor:
//     name length, name        u16, UTF-8 bytes
//     rank, dims               u8, u32 each
//     payload                  f32 little-endian, row-major
//   metadata length, metadata  u32, UTF-8 JSON text
//
// The metadata carries the model configuration and training provenance
// (seed, epoch, mechanism); the tensor manifest must match the layout that
// configuration implies.

inline constexpr char kCheckpointMagic[4] = {'G', 'E', 'M', 'R'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, ManifestMismatch, BadMetadata, Io };

  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string note;
};

struct LoadedModel {
  GroupEmotionModel<float> model;
  CheckpointMeta meta;
};

std::vector<std::uint8_t> encode_checkpoint(GroupEmotionModel<float>& model, const CheckpointMeta& meta);
LoadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(GroupEmotionModel<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path);
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace gemr
