// Intensity and geometry standardisation applied before training:
// bias correction, histogram matching to a shared reference, resampling to a
// common grid and mean/std normalisation. Intended order is
// correct_bias -> match_histogram -> standardize_geometry -> normalize.
#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmr/acquisition.hpp"
#include "cmr/diagnostics.hpp"
#include "cmr/image.hpp"

namespace cmr::preprocess {

// ---------------------------------------------------------------------------
// Bias correction

/// Log-domain polynomial bias field of one slice. Terms are x^i * y^j with
/// i + j <= degree, where x and y are pixel coordinates mapped to [-1, 1].
struct BiasField {
  int degree = 0;
  int nx = 1;
  int ny = 1;
  std::vector<double> coefficients; // ordered by total degree, then by j
  double foreground_mean = 0.0;     // mean of the fitted log field on foreground
  bool fitted = false;

  static constexpr double kMinGain = 0.05;

  double log_field(int x, int y) const;
  /// exp(log_field - foreground_mean), clamped to >= kMinGain.
  double gain(int x, int y) const;
};

int bias_term_count(int degree);

struct BiasCorrection {
  Volume volume;
  std::vector<BiasField> fields; // one per slice
};

inline constexpr double kLogEpsilon = 1e-3;

/// Per slice: Otsu foreground, then a least-squares fit of the polynomial's
/// finite differences to differences of log(intensity + 1e-3) between
/// neighbouring foreground pixels. Pairs straddling tissue edges are trimmed
/// as outliers (median-based cutoff, refit a few times). The image is divided
/// by the exponentiated field. Each slice is finally rescaled so its foreground mean
/// is unchanged. Slices without foreground pass through with a warning.
BiasCorrection correct_bias(const Volume &v, int degree = 3,
                            Diagnostics *diag = nullptr);

/// Otsu threshold over a 256-bin histogram; voxels strictly above it are
/// foreground. Returns the maximum value for constant input.
double otsu_threshold(std::span<const float> values);

// ---------------------------------------------------------------------------
// Histogram matching

inline constexpr int kHistogramBins = 256;
using Cdf = std::array<double, kHistogramBins>;

struct ReferenceHistogram {
  Cdf cdf{};                        // cdf[i] = P(u < (i+1)/256), u in [0,1]
  std::vector<std::string> sources; // contributing volume ids

  /// Throws InvalidArgument unless non-decreasing, within [0,1], ending at 1
  /// and built from at least one source.
  void validate() const;
  std::string to_json() const;
  static ReferenceHistogram from_json(const std::string &text);
  void save(const std::filesystem::path &path) const;
  static ReferenceHistogram load(const std::filesystem::path &path);
};

/// 256-bin CDF of the volume after min-max rescaling to [0,1].
/// Throws InvalidArgument for a constant volume.
Cdf volume_cdf(const Volume &v);

/// Pointwise mean of precomputed CDFs, one source id each.
ReferenceHistogram reference_from_cdfs(std::span<const Cdf> cdfs,
                                       std::vector<std::string> sources);

/// Pointwise mean of the member CDFs. Constant volumes are skipped with a
/// warning; throws InvalidArgument if nothing remains.
ReferenceHistogram build_reference_histogram(std::span<const Volume> volumes,
                                             Diagnostics *diag = nullptr);

/// Monotone CDF matching. Each voxel's rescaled intensity u goes through the
/// piecewise-linear source CDF and then the piecewise-linear inverse of the
/// reference CDF; the result is mapped back onto the source [min, max].
/// Constant volumes are returned unchanged with a warning.
Volume match_histogram(const Volume &v, const ReferenceHistogram &ref,
                       Diagnostics *diag = nullptr);

/// Largest |CDF_v[i] - ref[i]| over the bins, with v rescaled by [lo, hi].
double cdf_distance(const Volume &v, const Cdf &ref, double lo, double hi);

// ---------------------------------------------------------------------------
// Normalisation and geometry

inline constexpr double kTargetMean = 0.5;
inline constexpr double kTargetStd = 0.5;

/// 0.5 + 0.5 * (x - mean) / std over all voxels. Throws for zero std.
Volume normalize(const Volume &v);

struct GeometryTarget {
  Spacing2 spacing{acquisition::kCommonSpacingMm, acquisition::kCommonSpacingMm};
  int nx = acquisition::kCommonSize;
  int ny = acquisition::kCommonSize;
};

/// resample_bilinear followed by crop_or_pad_center.
Volume standardize_geometry(const Volume &v, const GeometryTarget &target = {});
/// Nearest-neighbour counterpart for label maps.
LabelMap standardize_geometry(const LabelMap &labels,
                              const GeometryTarget &target = {});

} // namespace cmr::preprocess
