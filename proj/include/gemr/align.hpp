#pragma once

#include <array>
#include <string_view>

#include "gemr/image.hpp"
#include "gemr/rng.hpp"

namespace gemr {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Left eye, right eye, nose tip, left mouth corner, right mouth corner.
/// Pixel-centred coordinates: the centre of pixel (0, 0) is (0.0, 0.0).
using Landmarks5 = std::array<Point, 5>;

inline constexpr std::size_t kAlignedWidth = 96;
inline constexpr std::size_t kAlignedHeight = 112;

/// Canonical positions in the 96x112 output frame; the eyes share one y.
inline constexpr Landmarks5 kCanonicalTemplate = {{{30.0, 52.0}, {66.0, 52.0}, {48.0, 72.0}, {33.0, 92.0}, {63.0, 92.0}}};

/// x' = a x - b y + tx,  y' = b x + a y + ty  with a = s cos(theta), b = s sin(theta).
struct SimilarityTransform {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  static SimilarityTransform from_params(double scale, double theta, double tx, double ty);

  double scale() const;
  double rotation() const;  // radians in (-pi, pi]
  double determinant() const { return a * a + b * b; }

  Point apply(Point p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  SimilarityTransform inverse() const;
  /// (this * other)(p) = this(other(p))
  SimilarityTransform compose(const SimilarityTransform& other) const;
};

enum class LandmarkSubset { All, EyesOnly };

/// Least-squares similarity taking `src` onto `dst`. On centred points the
/// optimum over a + ib is sum(conj(p) q) / sum(|p|^2), which is a scaled
/// rotation by construction, so reflections cannot occur. Throws
/// std::invalid_argument when the source points coincide, a coordinate is
/// not finite, or the optimum has zero scale.
SimilarityTransform estimate_similarity(const Landmarks5& src, const Landmarks5& dst,
                                        LandmarkSubset subset = LandmarkSubset::All);

/// Sum of squared residuals |T(src_i) - dst_i|^2 over the chosen subset.
double alignment_residual(const SimilarityTransform& t, const Landmarks5& src, const Landmarks5& dst,
                          LandmarkSubset subset = LandmarkSubset::All);

/// `to_template` maps source pixels to output pixels. Each output pixel is
/// filled by bilinear interpolation at the inverse-mapped source point and
/// rounded; points outside the source grid become 0. Sample coordinates
/// within 1e-6 of an integer are snapped to it, so integer shifts copy
/// pixels exactly. Output is always 96x112 with the input's channel count.
Image warp_to_template(const Image& image, const SimilarityTransform& to_template);

struct AlignResult {
  Image image;
  SimilarityTransform transform;  // source -> template frame
};

AlignResult align_face(const Image& image, const Landmarks5& landmarks,
                       const Landmarks5& target = kCanonicalTemplate,
                       LandmarkSubset subset = LandmarkSubset::All);

/// "x1,y1;x2,y2;x3,y3;x4,y4;x5,y5"; throws std::invalid_argument.
Landmarks5 parse_landmarks(std::string_view text);

// Synthetic test imagery: a smooth face-like intensity pattern defined in the
// template frame, rendered analytically through a similarity transform.

/// Intensity in [0, 255] at template-frame point p.
double synthetic_face(Point p);

/// Image of size w x h whose pixel q shows synthetic_face(template_to_image^-1(q)).
Image render_synthetic_face(std::size_t width, std::size_t height, const SimilarityTransform& template_to_image);

struct RestoreTrial {
  SimilarityTransform truth;      // template -> source image
  SimilarityTransform estimated;  // source image -> template
  double mean_abs_error = 0.0;    // over interior pixels, in [0, 255] units
  std::size_t pixels = 0;
};

/// Draws a random similarity (scale in [0.8, 2], any rotation), renders the
/// synthetic face through it, aligns it back and compares against the face
/// rendered directly in the template frame. Pixels within `margin` of the
/// output border, or whose source point lies within `margin` of the source
/// border, are excluded.
RestoreTrial render_transform_restore(Philox& rng, double margin = 6.0);

}  // namespace gemr
