// Landmark-guided rotation of the left ventricle and myocardium relative to
// the rest of the slice. The rotation moves scar texture around the
// myocardial wall while the anatomy (and the ground-truth labels) stay put.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmr/diagnostics.hpp"
#include "cmr/geometry.hpp"
#include "cmr/image.hpp"
#include "cmr/random.hpp"

namespace cmr::augment {

enum class ContourKind { Epicardial, Endocardial };

/// Closed pixel-centre polyline; the last point connects back to the first.
struct Contour {
  ContourKind kind = ContourKind::Epicardial;
  std::vector<Point2> points;

  double perimeter() const;
};

inline constexpr std::size_t kMinContourPoints = 8;

/// Moore-neighbour trace of the outer boundary of the non-zero pixels of
/// `mask`, which should form one 8-connected component. Returns boundary
/// pixel centres in clockwise screen order from the first pixel in raster
/// order.
std::vector<Point2> trace_boundary(const LabelSlice &mask);

/// Reorders a closed polyline counter-clockwise on screen (x right, y down),
/// starting from the point of largest x (smallest y among ties).
std::vector<Point2> canonical_order(std::vector<Point2> points);

/// Largest 4-connected component of `mask` (non-zero pixels), as 0/1.
LabelSlice largest_component(const LabelSlice &mask, int *components = nullptr);

/// `mask` with every background region not connected to the border filled.
LabelSlice fill_holes(const LabelSlice &mask);

struct SliceContours {
  Contour epicardial;  // boundary of LV u MYO
  Contour endocardial; // boundary of LV
};

/// Contours of one label slice in canonical order. Returns nullopt with a
/// warning when LV or MYO is missing or a contour is degenerate; keeps the
/// largest component with a warning when a region is fragmented.
std::optional<SliceContours> extract_contours(const LabelSlice &labels,
                                              Diagnostics *diag = nullptr,
                                              const std::string &context = {});
std::optional<SliceContours> extract_contours(const LabelMap &labels, int z,
                                              Diagnostics *diag = nullptr);

inline constexpr int kLandmarkCount = 50;

/// `n` points at arc lengths k * P / n, k = 0..n-1, along the closed contour
/// starting from its first point. Throws InvalidArgument for a zero-length
/// contour or n < 1.
std::vector<Point2> place_landmarks(const Contour &c, int n = kLandmarkCount);

struct SliceLandmarks {
  int z = 0;
  std::vector<Point2> epicardial;
  std::vector<Point2> endocardial;
};

struct LandmarkSet {
  std::vector<SliceLandmarks> slices;

  /// {"slices": [{"z": int, "epicardial": [[x, y], ...],
  ///              "endocardial": [[x, y], ...]}, ...]}
  std::string to_json() const;
};

/// Landmarks for every slice with valid contours; other slices are skipped
/// with a warning.
LandmarkSet build_landmarks(const LabelMap &labels, int n = kLandmarkCount,
                            Diagnostics *diag = nullptr);

// ---------------------------------------------------------------------------

struct RotationAugmentation {
  double angle_step_deg = 7.2;
  int count = 20;

  double max_angle_deg() const { return angle_step_deg * count; }
};

/// Filled epicardial region (largest LV u MYO component, holes filled), 0/1.
/// Throws InvalidArgument if the slice has no valid epicardial contour.
LabelSlice epicardial_mask(const LabelSlice &labels);

/// Centroid of the LV pixels inside the epicardial mask.
Point2 lv_centroid(const LabelSlice &labels, const LabelSlice &mask);

/// gaussian_blur_3x3 of the epicardial mask: 1 inside, 0 further than one
/// pixel outside, fractional on the boundary band.
Slice2D blend_weights(const LabelSlice &mask);

/// Rotates the slice by `angle_deg` clockwise about the LV centroid and
/// composites it as w * rotated + (1 - w) * original with w from
/// blend_weights. Pixels with w == 0 are copied unchanged.
Slice2D rotate_myocardium(const Slice2D &s, const LabelSlice &labels,
                          double angle_deg);

struct RotatedSlice {
  int k = 0;
  double angle_deg = 0.0;
  Slice2D image;
};

/// The original (k = 0) followed by rotations at k * step for k = 1..count.
/// Every entry pairs with the unmodified label slice.
std::vector<RotatedSlice> generate_rotation_set(const Slice2D &s,
                                                const LabelSlice &labels,
                                                const RotationAugmentation &aug = {});

inline constexpr double kGlobalRotationMaxDeg = 15.0;

/// Uniform draw from [-max, +max] degrees.
double sample_global_angle(Rng &rng, double max_deg = kGlobalRotationMaxDeg);

struct GlobalRotation {
  double angle_deg = 0.0;
  Slice2D image;
  LabelSlice labels;
};

/// Rotates image (bilinear) and labels (nearest) about the image centre by an
/// angle drawn from a generator seeded with `seed`.
GlobalRotation global_rotation(const Slice2D &s, const LabelSlice &labels,
                               std::uint64_t seed,
                               double max_deg = kGlobalRotationMaxDeg);

} // namespace cmr::augment
