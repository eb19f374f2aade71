// Segmentation overlap and surface-distance metrics with per-structure
// aggregation over a cohort.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmr/image.hpp"

namespace cmr::metrics {

/// 2|A n B| / (|A| + |B|) for voxels equal to `label`. Both empty gives 1,
/// one empty gives 0. Throws InvalidArgument on a dimension mismatch.
double dice(const LabelMap &pred, const LabelMap &gt, std::uint8_t label);
/// |A n B| / |A u B| with the same conventions.
double jaccard(const LabelMap &pred, const LabelMap &gt, std::uint8_t label);

enum class DistanceMode { Volume3D, PerSlice2D };

struct SurfaceOptions {
  DistanceMode mode = DistanceMode::Volume3D;
  /// When set, the Hausdorff value is the larger of the two directed
  /// percentiles (e.g. 95) instead of the maximum.
  std::optional<double> hausdorff_percentile;
};

/// Both values are absent ("undefined") when either mask is empty; in
/// per-slice mode, when no slice has both masks non-empty.
struct SurfaceDistance {
  std::optional<double> msd_mm;
  std::optional<double> hausdorff_mm;
  int slices_used = 0; // per-slice mode only
};

/// Surface voxels: voxels of `mask` with at least one 6-neighbour outside it.
/// Out-of-bounds neighbours count as outside, except along an axis of
/// extent 1, which has no neighbours. In 2D mode only in-plane neighbours
/// are considered.
std::vector<std::uint8_t> surface_mask(const Image3D<std::uint8_t> &mask,
                                       bool in_plane_only = false);

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// non-zero voxel of `seeds`, by separable lower-envelope sweeps. Voxels are
/// +inf when there are no seeds.
std::vector<double> squared_distance_transform(std::span<const std::uint8_t> seeds,
                                               int nx, int ny, int nz,
                                               Spacing3 spacing);

/// Symmetric mean surface distance and Hausdorff distance, in mm, between
/// the voxels labelled `label`.
SurfaceDistance surface_distances(const LabelMap &pred, const LabelMap &gt,
                                  std::uint8_t label, Spacing3 spacing,
                                  const SurfaceOptions &options = {});

inline constexpr std::array<std::uint8_t, 3> kStructures{Label::LV, Label::MYO,
                                                         Label::RV};
inline constexpr std::array<const char *, 3> kStructureNames{"LV", "MYO", "RV"};

enum Metric { Dice = 0, Jaccard = 1, SurfaceMm = 2, HausdorffMm = 3 };
inline constexpr std::size_t kMetricCount = 4;
inline constexpr std::array<const char *, kMetricCount> kMetricKeys{
    "dice", "jaccard", "msd_mm", "hausdorff_mm"};
inline constexpr std::array<const char *, kMetricCount> kMetricLabels{
    "Dice score", "Jaccard index", "Surface distance (mm)", "Hausdorff distance (mm)"};

/// One structure's results; an absent value is an undefined metric.
using StructureMetrics = std::array<std::optional<double>, kMetricCount>;

struct EvalReport {
  std::string case_id;
  std::array<StructureMetrics, 3> structures; // LV, MYO, RV
};

EvalReport evaluate_case(const LabelMap &pred, const LabelMap &gt, Spacing3 spacing,
                         std::string case_id = {}, const SurfaceOptions &options = {});

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0; // population standard deviation
  std::size_t count = 0;     // defined values
  std::size_t undefined = 0; // excluded values
};

struct AggregateReport {
  std::size_t cases = 0;
  std::array<std::array<MetricSummary, kMetricCount>, 3> structures{};
};

/// Mean and population std per structure and metric over the defined values.
AggregateReport aggregate(std::span<const EvalReport> reports);

/// {"cases": [...], "aggregate": {...}}; undefined values are null.
std::string to_json(std::span<const EvalReport> reports, const AggregateReport &agg);

/// Rows Dice/Jaccard/Surface/Hausdorff, columns avg. and std. for LV, MYO and
/// RV.
std::string to_table(const AggregateReport &agg);

} // namespace cmr::metrics
