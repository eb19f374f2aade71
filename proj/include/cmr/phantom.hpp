// Procedural multi-sequence short-axis phantoms with exactly known anatomy.
//
// Geometry is defined on a reference grid of `image_size` pixels at the
// common 1.25 mm spacing and centred in the field of view. Each sequence is
// rasterised on its own native grid covering the same field of view, so an
// LGE stack at 0.75 mm is larger in pixels than the bSSFP stack. Along the
// long axis the LV cavity tapers towards the apex while the wall thickness
// stays constant.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmr/acquisition.hpp"
#include "cmr/image.hpp"
#include "cmr/manifest.hpp"

namespace cmr::phantom {

enum class Tissue { Air, Body, LV, MYO, RV, Scar };
inline constexpr std::size_t kTissueCount = 6;

/// Mean intensity per tissue, indexed by Tissue.
using TissueIntensities = std::array<double, kTissueCount>;

/// Default contrast per sequence. LGE: nulled myocardium, bright scar, blood
/// pool in between. bSSFP: bright blood, dark myocardium, scar invisible.
/// T2: bright oedematous scar over a mid-grey myocardium, dark blood.
inline constexpr TissueIntensities kBSSFPIntensities{10, 300, 900, 250, 850, 250};
inline constexpr TissueIntensities kLGEIntensities{10, 250, 550, 80, 500, 950};
inline constexpr TissueIntensities kT2Intensities{10, 350, 180, 450, 180, 650};

/// Index of bSSFP/LGE/T2 in per-sequence arrays.
std::size_t sequence_slot(SequenceKind kind);

struct SequenceGeometry {
  double in_plane_mm = acquisition::kCommonSpacingMm;
  double thickness_mm = 10.0;
  int slices = 10;
};

/// Multiplicative field exp(cx * x + cy * y), x and y spanning [-1, 1] across
/// the image.
struct BiasSpec {
  double cx = 0.0;
  double cy = 0.0;
};

struct PhantomSpec {
  std::string patient_id = "patient01";
  int image_size = acquisition::kCommonSize; // reference-grid pixels
  double r_lv = 20.0;      // LV cavity radius at the base, reference pixels
  double r_epi = 30.0;     // epicardial radius at the base
  double rv_radius = 26.0; // RV disc radius at the base
  double rv_overlap = 0.45; // fraction of rv_radius hidden behind the septum
  double apex_taper = 0.35; // LV cavity shrinks by this fraction at the apex
  double scar_start_deg = 0.0;  // counter-clockwise from +x (screen view)
  double scar_extent_deg = 45.0;
  std::array<TissueIntensities, 3> intensities{kBSSFPIntensities, kLGEIntensities,
                                               kT2Intensities};
  double noise_sigma = 0.0;
  std::array<BiasSpec, 3> bias{};
  std::array<SequenceGeometry, 3> geometry{
      SequenceGeometry{acquisition::kBSSFP.in_plane_mm, 10.0, 10},
      SequenceGeometry{acquisition::kLGE.in_plane_mm, 5.0, 12},
      SequenceGeometry{acquisition::kT2.in_plane_mm, 15.0, 5}};
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on inconsistent geometry or parameters.
  void validate() const;
};

struct SequenceImage {
  Volume volume;
  LabelMap labels;
};

struct Patient {
  std::string patient_id;
  SequenceImage bssfp;
  SequenceImage lge;
  SequenceImage t2;
  LabelMap scar_mask; // 1 on scar, aligned with the LGE stack

  const SequenceImage &sequence(SequenceKind kind) const;
};

Patient generate_patient(const PhantomSpec &spec);

/// Renders a single sequence; cheaper than generate_patient when only one
/// stack is needed.
SequenceImage render_sequence(const PhantomSpec &spec, SequenceKind kind,
                              LabelMap *scar_mask = nullptr);

/// Angle of a pixel offset, degrees in [0, 360), counter-clockwise from +x
/// as seen on screen (y pointing down).
double screen_angle_deg(double dx, double dy);
bool in_scar_sector(double angle_deg, double start_deg, double extent_deg);

struct CohortOptions {
  int image_size = acquisition::kCommonSize;
  double noise_sigma = 15.0;
  double max_bias = 0.2;
  /// Patients with ground truth per sequence; negative means the cohort
  /// proportion of the reference cohort (35/45, 5/45, 35/45), rounded up.
  int labeled_bssfp = -1;
  int labeled_lge = -1;
  int labeled_t2 = -1;
};

struct CohortRecord {
  PhantomSpec spec;
  std::map<SequenceKind, bool> labeled;
};

/// Randomised cohort description; rendering happens in write_cohort.
std::vector<CohortRecord> generate_cohort(int n_patients, std::uint64_t base_seed,
                                          const CohortOptions &options = {});

struct WriteOptions {
  bool gzip = false;
  unsigned threads = 1;
};

/// Writes <dir>/<patient_id>/{bSSFP,LGE,T2}.nii, *_labels.nii, LGE_scar.nii
/// and <dir>/cohort.json; returns the manifest written.
CohortManifest write_cohort(const std::vector<CohortRecord> &cohort,
                            std::uint64_t base_seed,
                            const std::filesystem::path &dir,
                            const WriteOptions &options = {});

} // namespace cmr::phantom
