// Helpers that lay out phantom cohorts and synthetic-LGE directories on disk
// for builder and CLI tests.
#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "cmr/manifest.hpp"
#include "cmr/nifti.hpp"
#include "cmr/phantom.hpp"

namespace support {

namespace fs = std::filesystem;

/// Unique scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("cmr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const fs::path &path() const { return path_; }
  fs::path operator/(const std::string &s) const { return path_ / s; }

private:
  fs::path path_;
};

inline cmr::CohortManifest write_phantom_cohort(const fs::path &dir, int patients,
                                                std::uint64_t seed, int size,
                                                unsigned threads = 1) {
  cmr::phantom::CohortOptions opt;
  opt.image_size = size;
  const auto cohort = cmr::phantom::generate_cohort(patients, seed, opt);
  return cmr::phantom::write_cohort(cohort, seed, dir, {false, threads});
}

/// Stand-in for the trainer's synthesis output: every labelled bSSFP volume
/// with inverted contrast, paired with a copy of its bSSFP labels.
inline cmr::DatasetManifest write_synthetic_dir(const fs::path &cohort_dir,
                                                const fs::path &out) {
  const auto cohort = cmr::read_cohort_manifest(cohort_dir / "cohort.json");
  cmr::DatasetManifest m;
  for (const auto &p : cohort.patients) {
    const auto it = p.sequences.find(cmr::SequenceKind::bSSFP);
    if (it == p.sequences.end() || !it->second.labeled)
      continue;
    cmr::Volume v = cmr::nifti::read_volume(cohort_dir / it->second.image,
                                            cmr::SequenceKind::SyntheticLGE, p.patient_id);
    float hi = 0.0f;
    for (const float x : v.image.values())
      hi = std::max(hi, x);
    for (float &x : v.image.values())
      x = hi - x;
    fs::create_directories(out / p.patient_id);
    const std::string image = p.patient_id + "/SyntheticLGE.nii";
    const std::string labels = p.patient_id + "/SyntheticLGE_labels.nii";
    cmr::nifti::write_volume(v, out / image);
    fs::copy_file(cohort_dir / it->second.labels, out / labels,
                  fs::copy_options::overwrite_existing);
    m.records.push_back({image, labels, cmr::SequenceKind::SyntheticLGE,
                         cmr::Provenance::synthetic(), p.patient_id, cmr::Split::Train});
  }
  cmr::write_manifest(m, out / "manifest.json");
  return m;
}

inline bool same_bytes(const fs::path &a, const fs::path &b) {
  return cmr::nifti::read_file_bytes(a) == cmr::nifti::read_file_bytes(b);
}

/// True when both trees hold the same relative file names with equal bytes.
inline bool same_tree(const fs::path &a, const fs::path &b) {
  std::vector<fs::path> fa, fb;
  for (const auto &e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file())
      fa.push_back(fs::relative(e.path(), a));
  for (const auto &e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file())
      fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb)
    return false;
  for (const auto &f : fa)
    if (!same_bytes(a / f, b / f))
      return false;
  return true;
}

} // namespace support
