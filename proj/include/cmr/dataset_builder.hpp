// Assembles the eight training configurations from a cohort directory and
// writes per-slice NIfTI files plus a manifest for the trainer.
//
// Output layout under the build directory:
//   manifest.json
//   slices/<patient>/<sequence>_zNN.nii           image slice
//   slices/<patient>/<sequence>_zNN_labels.nii    label slice
//   slices/<patient>/LGE_zNN_rotKK.nii            scar rotation k (1..20)
// Rotated slices reuse the label slice of the original.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmr/diagnostics.hpp"
#include "cmr/manifest.hpp"

namespace cmr::dataset {

/// Inconsistent build request, e.g. a synthetic configuration without a
/// synthetic directory. `option` names the missing or offending input.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string option, const std::string &detail)
      : std::runtime_error(detail), option_(std::move(option)) {}
  const std::string &option() const { return option_; }

private:
  std::string option_;
};

struct TrainingConfig {
  int id = 1;
  bool include_bssfp = false;
  bool include_t2 = false;
  bool include_scar_rotations = false;
  bool include_synthetic_lge = false;

  /// 1 LGE, 2 +bSSFP, 3 +T2, 4 +rotations; 5..8 are 1..4 plus synthetic LGE.
  static TrainingConfig from_id(int id);
};

inline constexpr double kValFraction = 0.2;

struct PatientSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Number of validation patients out of n: ceil(n * fraction), kept within
/// [1, n - 1].
int validation_count(std::size_t n, double fraction);

/// Deterministic shuffle of the sorted ids, the first validation_count go to
/// val. Both lists come back sorted. Throws InvalidArgument for fewer than 2
/// patients or duplicate ids.
PatientSplit split_patients(std::vector<std::string> ids,
                            double val_fraction = kValFraction,
                            std::uint64_t seed = 0);

/// One split per cohort, shared by every configuration. Patients are
/// stratified into LGE-labeled, otherwise labeled and unlabeled groups so
/// each per-sequence pool of labeled patients gets about val_fraction
/// validation patients (within one). A labeled group always keeps at least
/// one training patient.
std::map<std::string, Split> cohort_split(const CohortManifest &cohort,
                                          double val_fraction, std::uint64_t seed,
                                          Diagnostics *diag = nullptr);

inline constexpr const char *kSyntheticManifestName = "manifest.json";
inline constexpr const char *kManifestName = "manifest.json";

struct BuildOptions {
  unsigned threads = 1;
  bool gzip = false;
  /// Rotation configurations list only rotations k = 1..20, not the
  /// original LGE slice.
  bool drop_original = false;
  double val_fraction = kValFraction;
};

/// Builds `config` from the cohort manifest at `cohort_manifest` (paths in it
/// are relative to its directory). Synthetic LGE records come from
/// <synthetic_dir>/manifest.json, a config 0 manifest whose records point at
/// SyntheticLGE volumes and the source bSSFP labels. Writes everything under
/// `out_dir` and returns the manifest stored at out_dir/manifest.json.
DatasetManifest build(const TrainingConfig &config,
                      const std::filesystem::path &cohort_manifest,
                      const std::optional<std::filesystem::path> &synthetic_dir,
                      std::uint64_t seed, const std::filesystem::path &out_dir,
                      const BuildOptions &options = {},
                      Diagnostics *diag = nullptr);

struct SummaryRow {
  SequenceKind sequence;
  ProvenanceKind provenance;
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t total() const { return train + val; }
};

/// Counts for every (sequence, provenance) pair, zeros included.
struct Summary {
  std::vector<SummaryRow> rows;
  std::size_t total() const;
  std::string to_text() const;
  std::string to_json() const;
};

Summary summarize(const DatasetManifest &m);

} // namespace cmr::dataset
