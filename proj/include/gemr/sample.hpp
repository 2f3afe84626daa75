#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gemr {

inline constexpr std::size_t kNumClasses = 3;

/// Fixed class encoding used everywhere (datasets, checkpoints, metrics).
enum class Label : std::uint8_t { Negative = 0, Neutral = 1, Positive = 2 };

std::string_view label_name(Label label);
/// Throws std::invalid_argument for values outside {0, 1, 2}.
Label label_from_index(long long index);
inline std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

/// One group image surrogate: a global context vector plus raw face vectors.
/// `dominant` is generator ground truth for diagnostics and is never fed to
/// a model.
struct GroupSample {
  std::string id;
  std::vector<float> global;
  std::vector<std::vector<float>> faces;
  Label label = Label::Neutral;
  std::optional<std::size_t> dominant;

  friend bool operator==(const GroupSample&, const GroupSample&) = default;
};

using Partition = std::vector<GroupSample>;

}  // namespace gemr
