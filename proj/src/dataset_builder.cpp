#include "cmr/dataset_builder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "cmr/nifti.hpp"
#include "cmr/parallel.hpp"
#include "cmr/random.hpp"
#include "cmr/scar_augment.hpp"

namespace fs = std::filesystem;

namespace cmr::dataset {

namespace {

int raw_validation_count(std::size_t n, double fraction) {
  // The small offset keeps products such as 45 * 0.2 from rounding up.
  return static_cast<int>(std::ceil(static_cast<double>(n) * fraction - 1e-9));
}

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0))
    throw InvalidArgument("validation fraction must lie in (0, 1)");
}

std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

struct Job {
  std::string patient_id;
  SequenceKind kind;
  fs::path image;
  fs::path labels;
  bool rotations = false;
};

struct JobResult {
  std::vector<ManifestRecord> records;
  Diagnostics diag;
};

bool labeled(const CohortPatient &p, SequenceKind kind) {
  const auto it = p.sequences.find(kind);
  return it != p.sequences.end() && it->second.labeled;
}

template <typename T> Image3D<T> as_volume(const Image2D<T> &s, double thickness) {
  Image3D<T> v(s.nx(), s.ny(), 1, {s.spacing().x, s.spacing().y, thickness});
  v.set_slice(0, s);
  return v;
}

JobResult run_job(const Job &job, Split split,
                  const fs::path &out_dir, const BuildOptions &options) {
  JobResult result;
  const Volume volume = nifti::read_volume(job.image, job.kind, job.patient_id);
  const LabelMap labels = nifti::read_label_map(job.labels);
  if (!volume.image.same_shape(labels))
    throw InvalidArgument(job.labels.string() + ": label map dimensions differ from " +
                          job.image.string());

  const std::string ext = options.gzip ? ".nii.gz" : ".nii";
  const std::string dir = "slices/" + job.patient_id;
  fs::create_directories(out_dir / dir);
  const std::string seq(to_string(job.kind));
  const double thickness = volume.spacing().z;
  const Provenance base = job.kind == SequenceKind::SyntheticLGE
                              ? Provenance::synthetic()
                              : Provenance::real();

  for (int z = 0; z < volume.nz(); ++z) {
    const std::string stem = dir + "/" + seq + "_z" + two_digits(z);
    const std::string image_rel = stem + ext;
    const std::string label_rel = stem + "_labels" + ext;
    const Slice2D s = volume.image.slice(z);
    const LabelSlice l = labels.slice(z);
    nifti::write_image(as_volume(s, thickness), out_dir / image_rel);
    nifti::write_label_map(as_volume(l, thickness), out_dir / label_rel);

    const auto record = [&](std::string path, Provenance p) {
      return ManifestRecord{std::move(path), label_rel, job.kind, p, job.patient_id, split};
    };
    if (!(job.rotations && options.drop_original))
      result.records.push_back(record(image_rel, base));
    if (!job.rotations)
      continue;

    const std::string where =
        job.patient_id + " " + seq + " slice " + std::to_string(z);
    if (!augment::extract_contours(l, &result.diag, where)) {
      result.diag.warn(where + ": no scar rotations");
      continue;
    }
    const auto set = augment::generate_rotation_set(s, l);
    for (const auto &r : set) {
      if (r.k == 0)
        continue;
      const std::string rot_rel = stem + "_rot" + two_digits(r.k) + ext;
      nifti::write_image(as_volume(r.image, thickness), out_dir / rot_rel);
      result.records.push_back(record(rot_rel, Provenance::rotated(r.k)));
    }
  }
  return result;
}

} // namespace

TrainingConfig TrainingConfig::from_id(int id) {
  if (id < 1 || id > 8)
    throw ConfigError("config", "training configuration must be 1..8, got " +
                                    std::to_string(id));
  const int base = (id - 1) % 4 + 1;
  TrainingConfig c;
  c.id = id;
  c.include_bssfp = base >= 2;
  c.include_t2 = base >= 3;
  c.include_scar_rotations = base == 4;
  c.include_synthetic_lge = id >= 5;
  return c;
}

int validation_count(std::size_t n, double fraction) {
  check_fraction(fraction);
  if (n < 2)
    throw InvalidArgument("a split needs at least 2 patients");
  return std::clamp(raw_validation_count(n, fraction), 1, static_cast<int>(n) - 1);
}

PatientSplit split_patients(std::vector<std::string> ids, double val_fraction,
                            std::uint64_t seed) {
  const int n_val = validation_count(ids.size(), val_fraction);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw InvalidArgument("duplicate patient id " +
                          *std::adjacent_find(ids.begin(), ids.end()));
  Rng rng(seed);
  rng.shuffle(ids);
  PatientSplit split;
  split.val.assign(ids.begin(), ids.begin() + n_val);
  split.train.assign(ids.begin() + n_val, ids.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::map<std::string, Split> cohort_split(const CohortManifest &cohort,
                                          double val_fraction, std::uint64_t seed,
                                          Diagnostics *diag) {
  check_fraction(val_fraction);
  if (cohort.patients.size() < 2)
    throw InvalidArgument("a split needs at least 2 patients");

  std::array<std::vector<std::string>, 3> strata;
  for (const auto &p : cohort.patients) {
    const bool other = labeled(p, SequenceKind::bSSFP) || labeled(p, SequenceKind::T2);
    strata[labeled(p, SequenceKind::LGE) ? 0 : other ? 1 : 2].push_back(p.patient_id);
  }

  // Cumulative targets over the nested pools LGE-labeled, any-labeled, all.
  std::map<std::string, Split> out;
  std::size_t pool = 0;
  int assigned = 0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto &ids = strata[s];
    pool += ids.size();
    // Labeled groups keep at least one training patient; a shortfall moves
    // on to the next group through the cumulative target.
    const int cap = s < 2 ? static_cast<int>(ids.size()) - 1 : static_cast<int>(ids.size());
    const int want =
        std::clamp(raw_validation_count(pool, val_fraction) - assigned, 0, std::max(cap, 0));
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, s));
    rng.shuffle(ids);
    for (std::size_t i = 0; i < ids.size(); ++i)
      out[ids[i]] = static_cast<int>(i) < want ? Split::Val : Split::Train;
    assigned += want;
  }
  if (assigned == 0)
    warn(diag, "validation split is empty");
  return out;
}

DatasetManifest build(const TrainingConfig &config, const fs::path &cohort_manifest,
                      const std::optional<fs::path> &synthetic_dir,
                      std::uint64_t seed, const fs::path &out_dir,
                      const BuildOptions &options, Diagnostics *diag) {
  if (config.include_synthetic_lge && !synthetic_dir)
    throw ConfigError("synthetic-dir", "configuration " + std::to_string(config.id) +
                                           " needs a synthetic LGE directory");

  const CohortManifest cohort = read_cohort_manifest(cohort_manifest);
  const fs::path base = cohort_manifest.parent_path();
  const auto split = cohort_split(cohort, options.val_fraction, seed, diag);

  std::map<std::string, std::vector<Job>> synthetic;
  if (config.include_synthetic_lge) {
    const fs::path path = *synthetic_dir / kSyntheticManifestName;
    const DatasetManifest m = read_manifest(path);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      const ManifestRecord &r = m.records[i];
      if (r.sequence != SequenceKind::SyntheticLGE)
        throw ManifestError("/records/" + std::to_string(i) + "/sequence",
                            "expected SyntheticLGE", path.string());
      if (!split.contains(r.patient_id))
        throw ManifestError("/records/" + std::to_string(i) + "/patient_id",
                            "patient " + r.patient_id + " is not in the cohort",
                            path.string());
      if (!synthetic[r.patient_id].empty())
        throw ManifestError("/records/" + std::to_string(i) + "/patient_id",
                            "second synthetic volume for " + r.patient_id,
                            path.string());
      synthetic[r.patient_id].push_back({r.patient_id, SequenceKind::SyntheticLGE,
                                         *synthetic_dir / r.image_path,
                                         *synthetic_dir / r.label_path, false});
    }
  }

  std::vector<Job> jobs;
  for (const auto &p : cohort.patients) {
    const auto add = [&](SequenceKind kind, bool rotations) {
      if (!labeled(p, kind))
        return;
      const auto &e = p.sequences.at(kind);
      jobs.push_back({p.patient_id, kind, base / e.image, base / e.labels, rotations});
    };
    add(SequenceKind::LGE, config.include_scar_rotations);
    if (config.include_bssfp)
      add(SequenceKind::bSSFP, false);
    if (config.include_t2)
      add(SequenceKind::T2, false);
    if (const auto it = synthetic.find(p.patient_id); it != synthetic.end())
      jobs.insert(jobs.end(), it->second.begin(), it->second.end());
  }

  fs::create_directories(out_dir);
  std::vector<JobResult> results(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    results[i] = run_job(jobs[i], split.at(jobs[i].patient_id), out_dir, options);
  });

  DatasetManifest manifest{config.id, seed, {}};
  for (auto &r : results) {
    manifest.records.insert(manifest.records.end(), r.records.begin(), r.records.end());
    for (auto &w : r.diag.warnings)
      warn(diag, std::move(w));
  }
  write_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

// ---------------------------------------------------------------------------

std::size_t Summary::total() const {
  std::size_t n = 0;
  for (const auto &r : rows)
    n += r.total();
  return n;
}

std::string Summary::to_text() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-16s %-10s %8s %8s %8s\n", "sequence",
                "provenance", "train", "val", "total");
  out << line;
  for (const auto &r : rows) {
    std::snprintf(line, sizeof line, "%-16s %-10s %8zu %8zu %8zu\n",
                  std::string(to_string(r.sequence)).c_str(),
                  std::string(to_string(r.provenance)).c_str(), r.train, r.val,
                  r.total());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-27s %8s %8s %8zu\n", "all", "", "", total());
  out << line;
  return out.str();
}

std::string Summary::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto &r : rows)
    j["rows"].push_back({{"sequence", to_string(r.sequence)},
                         {"provenance", to_string(r.provenance)},
                         {"train", r.train},
                         {"val", r.val},
                         {"total", r.total()}});
  j["total"] = total();
  return j.dump(2) + "\n";
}

Summary summarize(const DatasetManifest &m) {
  constexpr SequenceKind kinds[] = {SequenceKind::bSSFP, SequenceKind::LGE,
                                    SequenceKind::T2, SequenceKind::SyntheticLGE,
                                    SequenceKind::SyntheticBSSFP};
  constexpr ProvenanceKind provenances[] = {ProvenanceKind::Real, ProvenanceKind::Rotated,
                                            ProvenanceKind::Synthetic};
  Summary s;
  for (const auto k : kinds)
    for (const auto p : provenances)
      s.rows.push_back({k, p});
  for (const auto &r : m.records) {
    for (auto &row : s.rows)
      if (row.sequence == r.sequence && row.provenance == r.provenance.kind) {
        (r.split == Split::Train ? row.train : row.val) += 1;
        break;
      }
  }
  return s;
}

} // namespace cmr::dataset
