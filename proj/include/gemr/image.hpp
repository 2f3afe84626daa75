#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gemr {

/// 8-bit image, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c = 1, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline constexpr std::size_t kMaxPnmDimension = 65536;

class PnmError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, MalformedHeader, BadMaxval, Oversized, Truncated, Io };

  PnmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Binary P5 (gray) or P6 (RGB), maxval 255. Header tokens are separated by
/// whitespace; '#' starts a comment running to end of line. Exactly one
/// whitespace byte separates maxval from the raster; bytes after the raster
/// are ignored.
Image parse_pnm(const std::vector<std::uint8_t>& bytes);
/// Canonical encoding: "P5\n<w> <h>\n255\n" (or P6) then the raster.
std::vector<std::uint8_t> write_pnm(const Image& image);

Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& image, const std::filesystem::path& path);

/// Luma conversion (ITU-R 601 weights, rounded); gray images pass through.
Image to_gray(const Image& image);

}  // namespace gemr
