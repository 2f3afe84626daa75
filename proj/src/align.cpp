#include "gemr/align.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gemr {
namespace {

constexpr double kSnap = 1e-6;

std::size_t subset_size(LandmarkSubset s) { return s == LandmarkSubset::EyesOnly ? 2 : 5; }

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= kSnap ? r : v;
}

double gaussian(Point p, Point c, double sx, double sy) {
  const double dx = (p.x - c.x) / sx;
  const double dy = (p.y - c.y) / sy;
  return std::exp(-0.5 * (dx * dx + dy * dy));
}

std::uint8_t to_pixel(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

SimilarityTransform SimilarityTransform::from_params(double scale, double theta, double tx, double ty) {
  return {scale * std::cos(theta), scale * std::sin(theta), tx, ty};
}

double SimilarityTransform::scale() const { return std::hypot(a, b); }

double SimilarityTransform::rotation() const { return std::atan2(b, a); }

SimilarityTransform SimilarityTransform::inverse() const {
  const double d = determinant();
  if (!(d > 0.0)) throw std::invalid_argument("similarity transform is singular");
  const double ia = a / d;
  const double ib = -b / d;
  return {ia, ib, -(ia * tx - ib * ty), -(ib * tx + ia * ty)};
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& o) const {
  const Point t = apply({o.tx, o.ty});
  return {a * o.a - b * o.b, a * o.b + b * o.a, t.x, t.y};
}

SimilarityTransform estimate_similarity(const Landmarks5& src, const Landmarks5& dst, LandmarkSubset subset) {
  const std::size_t n = subset_size(subset);
  Point ms, md;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(src[i].x) || !std::isfinite(src[i].y) || !std::isfinite(dst[i].x) || !std::isfinite(dst[i].y)) {
      throw std::invalid_argument("estimate_similarity: non-finite landmark coordinate");
    }
    ms.x += src[i].x;
    ms.y += src[i].y;
    md.x += dst[i].x;
    md.y += dst[i].y;
  }
  ms.x /= static_cast<double>(n);
  ms.y /= static_cast<double>(n);
  md.x /= static_cast<double>(n);
  md.y /= static_cast<double>(n);
  double var = 0.0, p = 0.0, q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sx = src[i].x - ms.x, sy = src[i].y - ms.y;
    const double dx = dst[i].x - md.x, dy = dst[i].y - md.y;
    var += sx * sx + sy * sy;
    p += sx * dx + sy * dy;
    q += sx * dy - sy * dx;
  }
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) spread = std::max({spread, std::abs(src[i].x), std::abs(src[i].y)});
  if (var <= 1e-18 * std::max(1.0, spread * spread)) {
    throw std::invalid_argument("estimate_similarity: source landmarks are coincident");
  }
  SimilarityTransform t{p / var, q / var, 0.0, 0.0};
  if (!(t.determinant() > 0.0)) throw std::invalid_argument("estimate_similarity: degenerate correspondence (zero scale)");
  const Point m = t.apply(ms);
  t.tx = md.x - m.x;
  t.ty = md.y - m.y;
  return t;
}

double alignment_residual(const SimilarityTransform& t, const Landmarks5& src, const Landmarks5& dst,
                          LandmarkSubset subset) {
  double r = 0.0;
  for (std::size_t i = 0; i < subset_size(subset); ++i) {
    const Point p = t.apply(src[i]);
    r += (p.x - dst[i].x) * (p.x - dst[i].x) + (p.y - dst[i].y) * (p.y - dst[i].y);
  }
  return r;
}

Image warp_to_template(const Image& image, const SimilarityTransform& to_template) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * image.channels) {
    throw std::invalid_argument("warp_to_template: invalid image");
  }
  const auto inv = to_template.inverse();
  const std::size_t ch = image.channels;
  Image out(kAlignedWidth, kAlignedHeight, ch);
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  for (std::size_t v = 0; v < kAlignedHeight; ++v) {
    for (std::size_t u = 0; u < kAlignedWidth; ++u) {
      const Point s = inv.apply({static_cast<double>(u), static_cast<double>(v)});
      const double x = snap(s.x);
      const double y = snap(s.y);
      if (!(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y)) continue;
      const auto x0 = static_cast<std::size_t>(x);
      const auto y0 = static_cast<std::size_t>(y);
      const double fx = x - static_cast<double>(x0);
      const double fy = y - static_cast<double>(y0);
      const std::size_t x1 = fx > 0.0 ? x0 + 1 : x0;
      const std::size_t y1 = fy > 0.0 ? y0 + 1 : y0;
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
        const double bottom = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
        out.at(u, v, c) = to_pixel((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

AlignResult align_face(const Image& image, const Landmarks5& landmarks, const Landmarks5& target,
                       LandmarkSubset subset) {
  const auto t = estimate_similarity(landmarks, target, subset);
  return {warp_to_template(image, t), t};
}

Landmarks5 parse_landmarks(std::string_view text) {
  Landmarks5 out;
  std::size_t count = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("malformed landmarks '" + std::string(text) + "': " + why);
  };
  auto number = [&](std::string_view tok) {
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      fail("bad number '" + std::string(tok) + "'");
    }
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(';', start), text.size());
    const auto pair = text.substr(start, end - start);
    const auto comma = pair.find(',');
    if (comma == std::string_view::npos || pair.find(',', comma + 1) != std::string_view::npos) {
      fail("expected 'x,y' pairs");
    }
    if (count == 5) fail("more than five points");
    out[count++] = {number(pair.substr(0, comma)), number(pair.substr(comma + 1))};
    start = end + 1;
  }
  if (count != 5) fail("expected five points, got " + std::to_string(count));
  return out;
}

double synthetic_face(Point p) {
  const auto& t = kCanonicalTemplate;
  double v = 40.0;
  v += 140.0 * gaussian(p, {48.0, 70.0}, 28.0, 36.0);
  v -= 90.0 * gaussian(p, t[0], 5.0, 4.0);
  v -= 90.0 * gaussian(p, t[1], 5.0, 4.0);
  v += 50.0 * gaussian(p, t[2], 4.0, 6.0);
  v -= 70.0 * gaussian(p, {(t[3].x + t[4].x) / 2.0, t[3].y}, 13.0, 4.0);
  return std::clamp(v, 0.0, 255.0);
}

Image render_synthetic_face(std::size_t width, std::size_t height, const SimilarityTransform& template_to_image) {
  const auto inv = template_to_image.inverse();
  Image img(width, height, 1);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      img.at(x, y) = to_pixel(synthetic_face(inv.apply({static_cast<double>(x), static_cast<double>(y)})));
  return img;
}

RestoreTrial render_transform_restore(Philox& rng, double margin) {
  const double s = rng.uniform(0.8, 2.0);
  const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
  auto t = SimilarityTransform::from_params(s, theta, 0.0, 0.0);
  // Fit the transformed template frame into the source image with padding.
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (Point c : {Point{0, 0}, Point{kAlignedWidth - 1.0, 0}, Point{0, kAlignedHeight - 1.0},
                  Point{kAlignedWidth - 1.0, kAlignedHeight - 1.0}}) {
    const Point q = t.apply(c);
    lo_x = std::min(lo_x, q.x);
    lo_y = std::min(lo_y, q.y);
    hi_x = std::max(hi_x, q.x);
    hi_y = std::max(hi_y, q.y);
  }
  const double pad = 10.0;
  t.tx = pad - lo_x + rng.uniform(0.0, 1.0);
  t.ty = pad - lo_y + rng.uniform(0.0, 1.0);
  const auto width = static_cast<std::size_t>(std::ceil(hi_x - lo_x + 2 * pad + 1));
  const auto height = static_cast<std::size_t>(std::ceil(hi_y - lo_y + 2 * pad + 1));
  const Image source = render_synthetic_face(width, height, t);

  Landmarks5 landmarks;
  for (std::size_t i = 0; i < 5; ++i) landmarks[i] = t.apply(kCanonicalTemplate[i]);
  const auto aligned = align_face(source, landmarks);
  const auto reference = render_synthetic_face(kAlignedWidth, kAlignedHeight, {});

  RestoreTrial trial{t, aligned.transform, 0.0, 0};
  double total = 0.0;
  const auto back = aligned.transform.inverse();
  for (std::size_t v = 0; v < kAlignedHeight; ++v) {
    for (std::size_t u = 0; u < kAlignedWidth; ++u) {
      const double fu = static_cast<double>(u), fv = static_cast<double>(v);
      if (fu < margin || fv < margin || fu > kAlignedWidth - 1 - margin || fv > kAlignedHeight - 1 - margin) continue;
      const Point sp = back.apply({fu, fv});
      if (sp.x < margin || sp.y < margin || sp.x > static_cast<double>(width) - 1 - margin ||
          sp.y > static_cast<double>(height) - 1 - margin) {
        continue;
      }
      total += std::abs(static_cast<double>(aligned.image.at(u, v)) - static_cast<double>(reference.at(u, v)));
      ++trial.pixels;
    }
  }
  trial.mean_abs_error = trial.pixels ? total / static_cast<double>(trial.pixels) : 0.0;
  return trial;
}

}  // namespace gemr
