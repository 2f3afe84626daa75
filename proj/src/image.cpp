#include "gemr/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace gemr {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) throw PnmError(PnmError::Kind::Truncated, std::string("truncated header before ") + what);
    if (!std::isdigit(b_[pos_])) {
      throw PnmError(PnmError::Kind::MalformedHeader, std::string("malformed header: expected ") + what);
    }
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > 1'000'000'000) throw PnmError(PnmError::Kind::Oversized, std::string("oversized ") + what);
      ++pos_;
    }
    if (pos_ >= b_.size()) throw PnmError(PnmError::Kind::Truncated, std::string("truncated header after ") + what);
    if (!std::isspace(b_[pos_]) && b_[pos_] != '#') {
      throw PnmError(PnmError::Kind::MalformedHeader, std::string("malformed header: bad ") + what);
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

Image parse_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw PnmError(PnmError::Kind::BadMagic, "bad magic: expected P5 or P6");
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader h(bytes);
  const auto width = h.number("width");
  const auto height = h.number("height");
  if (width == 0 || height == 0) throw PnmError(PnmError::Kind::MalformedHeader, "malformed header: zero dimension");
  if (width > kMaxPnmDimension || height > kMaxPnmDimension) {
    throw PnmError(PnmError::Kind::Oversized, "oversized image: " + std::to_string(width) + "x" +
                                                  std::to_string(height) + " exceeds 65536");
  }
  const auto maxval = h.number("maxval");
  if (maxval != 255) throw PnmError(PnmError::Kind::BadMaxval, "unsupported maxval " + std::to_string(maxval) + ", need 255");
  if (bytes[h.pos()] == '#') throw PnmError(PnmError::Kind::MalformedHeader, "malformed header: comment after maxval");
  h.advance();
  const std::size_t need = width * height * channels;
  if (bytes.size() - h.pos() < need) {
    throw PnmError(PnmError::Kind::Truncated, "truncated raster: need " + std::to_string(need) + " bytes, have " +
                                                  std::to_string(bytes.size() - h.pos()));
  }
  Image img(width, height, channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.pos()), need, img.pixels.begin());
  return img;
}

std::vector<std::uint8_t> write_pnm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_pnm: need 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw std::invalid_argument("write_pnm: pixel count does not match dimensions");
  }
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PnmError(PnmError::Kind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pnm(bytes);
}

void write_pnm(const Image& image, const std::filesystem::path& path) {
  const auto bytes = write_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PnmError(PnmError::Kind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PnmError(PnmError::Kind::Io, "failed writing '" + path.string() + "'");
}

Image to_gray(const Image& image) {
  if (image.channels == 1) return image;
  Image out(image.width, image.height, 1);
  for (std::size_t i = 0; i < image.width * image.height; ++i) {
    const double y = 0.299 * image.pixels[3 * i] + 0.587 * image.pixels[3 * i + 1] + 0.114 * image.pixels[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(y));
  }
  return out;
}

}  // namespace gemr
