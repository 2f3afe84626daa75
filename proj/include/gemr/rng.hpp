#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace gemr {

/// Counter-based generator built on Philox4x32-10 (Salmon et al., SC'11).
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into a
/// 64-bit stream id (high half) and a 64-bit block index (low half); each
/// block yields four 32-bit words that are consumed in order. Two generators
/// with the same (seed, stream) produce the same sequence on every platform,
/// and distinct streams are independent, so per-sample streams can be drawn
/// in any order or on any worker.
///
/// Derived draws:
///   uniform()  = (hi >> 5) * 2^26 + (lo >> 6), scaled by 2^-53, from two words
///   normal()   = Box-Muller cosine branch on (1 - uniform(), uniform())
///   below(n)   = Lemire multiply-shift with rejection on a 32-bit word
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint32_t next_u32() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  std::uint32_t below(std::uint32_t n) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Raw block function: encrypt `counter` under `key`.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  std::size_t used_ = 4;
};

/// In-place Fisher-Yates shuffle driven by `rng.below`.
template <typename Container>
void shuffle(Container& items, Philox& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint32_t>(i)));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace gemr
