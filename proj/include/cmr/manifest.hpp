// Dataset and cohort manifests and their JSON form.
//
// Dataset manifest:
//   {"config_id": int, "seed": int, "records": [
//      {"image_path": str, "label_path": str, "sequence": str,
//       "provenance": "real" | "rotated" | "synthetic",
//       "rotation_k": int,            // present only for "rotated"
//       "patient_id": str, "split": "train" | "val"}, ...]}
//
// Cohort manifest:
//   {"base_seed": int, "patients": [
//      {"patient_id": str,
//       "sequences": {"<kind>": {"image": str, "labels": str,
//                                "labeled": bool}, ...},
//       "scar_mask": str}, ...]}          // scar_mask optional
//
// Paths are stored as written, normally relative to the manifest file.
// Keys are emitted in a fixed order so equal manifests serialise to equal
// bytes. Unknown keys are rejected.
#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmr/image.hpp"

namespace cmr {

class ManifestError : public std::runtime_error {
public:
  /// `json_path` locates the offending value, e.g. "/records/3/sequence".
  ManifestError(std::string json_path, std::string detail,
                std::string file = {});
  const std::string &json_path() const { return json_path_; }
  const std::string &detail() const { return detail_; }
  ManifestError in_file(const std::filesystem::path &file) const {
    return {json_path_, detail_, file.string()};
  }

private:
  std::string json_path_;
  std::string detail_;
};

enum class ProvenanceKind { Real, Rotated, Synthetic };
enum class Split { Train, Val };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::Real;
  int rotation_k = 0; // meaningful only for Rotated

  static Provenance real() { return {}; }
  static Provenance rotated(int k) { return {ProvenanceKind::Rotated, k}; }
  static Provenance synthetic() { return {ProvenanceKind::Synthetic, 0}; }

  auto operator<=>(const Provenance &) const = default;
};

std::string_view to_string(ProvenanceKind kind);
std::string_view to_string(Split split);

struct ManifestRecord {
  std::string image_path;
  std::string label_path;
  SequenceKind sequence = SequenceKind::LGE;
  Provenance provenance;
  std::string patient_id;
  Split split = Split::Train;

  auto operator<=>(const ManifestRecord &) const = default;
};

struct DatasetManifest {
  int config_id = 0; // 1..8 for training configurations, 0 otherwise
  std::uint64_t seed = 0;
  std::vector<ManifestRecord> records;

  bool operator==(const DatasetManifest &) const = default;
};

struct CohortSequenceEntry {
  std::string image;
  std::string labels;
  bool labeled = false;
  bool operator==(const CohortSequenceEntry &) const = default;
};

struct CohortPatient {
  std::string patient_id;
  std::map<SequenceKind, CohortSequenceEntry> sequences;
  std::optional<std::string> scar_mask;
  bool operator==(const CohortPatient &) const = default;
};

struct CohortManifest {
  std::uint64_t base_seed = 0;
  std::vector<CohortPatient> patients;
  bool operator==(const CohortManifest &) const = default;
};

std::string to_json_string(const DatasetManifest &m);
DatasetManifest dataset_manifest_from_json(const std::string &text);
DatasetManifest read_manifest(const std::filesystem::path &path);
void write_manifest(const DatasetManifest &m, const std::filesystem::path &path);

std::string to_json_string(const CohortManifest &m);
CohortManifest cohort_manifest_from_json(const std::string &text);
CohortManifest read_cohort_manifest(const std::filesystem::path &path);
void write_cohort_manifest(const CohortManifest &m,
                           const std::filesystem::path &path);

} // namespace cmr
