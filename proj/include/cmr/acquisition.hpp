// Acquisition parameters of the three multi-sequence cardiac MR series
// (end-diastolic short-axis stacks). Used as defaults by preprocessing and
// by the phantom generator.
#pragma once

#include "cmr/image.hpp"

namespace cmr::acquisition {

struct SequenceProtocol {
  SequenceKind sequence;
  double in_plane_mm;        // square pixels
  double thickness_min_mm;   // slice thickness range
  double thickness_max_mm;
  int slices_min;            // slices per volume
  int slices_max;
  int segmented_patients;    // of kCohortPatients
  double tr_ms;
  double te_ms;
};

inline constexpr int kCohortPatients = 45;

inline constexpr SequenceProtocol kBSSFP{SequenceKind::bSSFP, 1.25, 8.0, 13.0, 8, 12, 35, 2.7, 1.4};
inline constexpr SequenceProtocol kLGE{SequenceKind::LGE, 0.75, 5.0, 5.0, 10, 18, 5, 3.6, 1.8};
inline constexpr SequenceProtocol kT2{SequenceKind::T2, 1.35, 12.0, 20.0, 3, 7, 35, 2000.0, 90.0};

inline constexpr SequenceKind kAcquired[3] = {SequenceKind::bSSFP, SequenceKind::LGE,
                                              SequenceKind::T2};

inline constexpr const SequenceProtocol &protocol(SequenceKind kind) {
  switch (kind) {
  case SequenceKind::bSSFP:
  case SequenceKind::SyntheticBSSFP:
    return kBSSFP;
  case SequenceKind::T2:
    return kT2;
  default:
    return kLGE;
  }
}

/// Common in-plane grid every sequence is resampled onto (the bSSFP grid).
inline constexpr double kCommonSpacingMm = 1.25;
inline constexpr int kCommonSize = 256;

} // namespace cmr::acquisition
