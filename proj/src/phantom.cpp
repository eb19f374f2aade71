#include "cmr/phantom.hpp"

#include <cmath>
#include <numbers>

#include "cmr/nifti.hpp"
#include "cmr/parallel.hpp"
#include "cmr/random.hpp"

namespace cmr::phantom {

namespace {

constexpr double kBodySemiX = 0.44; // fractions of the field of view
constexpr double kBodySemiY = 0.36;
constexpr double kRvApexCutoff = 0.85; // no RV beyond this long-axis fraction
constexpr double kRvTaper = 0.4;

// Cross-section of the anatomy at long-axis position t in (0, 1).
struct Section {
  double r_lv;
  double r_epi;
  double rv_radius; // 0 when the RV is absent
  double rv_center_x;
};

Section section_at(const PhantomSpec &spec, double t) {
  Section s{};
  s.r_lv = spec.r_lv * (1.0 - spec.apex_taper * t);
  s.r_epi = s.r_lv + (spec.r_epi - spec.r_lv);
  if (t < kRvApexCutoff) {
    s.rv_radius = spec.rv_radius * (1.0 - kRvTaper * t);
    s.rv_center_x = -(s.r_epi + s.rv_radius * (1.0 - 2.0 * spec.rv_overlap));
  }
  return s;
}

Tissue tissue_at(const PhantomSpec &spec, const Section &sec, double dx,
                 double dy) {
  const double r = std::hypot(dx, dy);
  if (r <= sec.r_lv)
    return Tissue::LV;
  if (r <= sec.r_epi)
    return in_scar_sector(screen_angle_deg(dx, dy), spec.scar_start_deg,
                          spec.scar_extent_deg)
               ? Tissue::Scar
               : Tissue::MYO;
  if (sec.rv_radius > 0.0 &&
      std::hypot(dx - sec.rv_center_x, dy) <= sec.rv_radius)
    return Tissue::RV;
  const double n = spec.image_size;
  const double ex = dx / (kBodySemiX * n);
  const double ey = dy / (kBodySemiY * n);
  return ex * ex + ey * ey <= 1.0 ? Tissue::Body : Tissue::Air;
}

std::uint8_t label_of(Tissue t) {
  switch (t) {
  case Tissue::LV:
    return Label::LV;
  case Tissue::MYO:
  case Tissue::Scar:
    return Label::MYO;
  case Tissue::RV:
    return Label::RV;
  default:
    return Label::Background;
  }
}

int native_extent(const PhantomSpec &spec, double in_plane_mm) {
  return std::max(1, static_cast<int>(std::lround(
                         spec.image_size * acquisition::kCommonSpacingMm / in_plane_mm)));
}

double unit_coord(int i, int n) { return n > 1 ? 2.0 * i / (n - 1) - 1.0 : 0.0; }

std::string patient_name(int index) {
  const std::string digits = std::to_string(index + 1);
  return "patient" + std::string(digits.size() < 2 ? 2 - digits.size() : 0, '0') + digits;
}

} // namespace

std::size_t sequence_slot(SequenceKind kind) {
  switch (kind) {
  case SequenceKind::bSSFP:
    return 0;
  case SequenceKind::LGE:
    return 1;
  case SequenceKind::T2:
    return 2;
  default:
    throw InvalidArgument("phantoms only render bSSFP, LGE and T2");
  }
}

double screen_angle_deg(double dx, double dy) {
  double a = std::atan2(-dy, dx) * 180.0 / std::numbers::pi;
  if (a < 0.0)
    a += 360.0;
  return a;
}

bool in_scar_sector(double angle_deg, double start_deg, double extent_deg) {
  double rel = std::fmod(angle_deg - start_deg, 360.0);
  if (rel < 0.0)
    rel += 360.0;
  return rel <= extent_deg;
}

void PhantomSpec::validate() const {
  if (image_size < 8)
    throw InvalidArgument("phantom image_size must be >= 8");
  if (!(r_lv > 0.0 && r_lv < r_epi && r_epi < image_size / 2.0))
    throw InvalidArgument("phantom radii must satisfy 0 < r_lv < r_epi < size/2");
  if (!(scar_extent_deg > 0.0 && scar_extent_deg <= 180.0))
    throw InvalidArgument("scar extent must lie in (0, 180] degrees");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw InvalidArgument("noise sigma must be >= 0");
  if (!(rv_radius >= 0.0) || !(apex_taper >= 0.0 && apex_taper < 1.0))
    throw InvalidArgument("invalid RV radius or apex taper");
  for (const auto &g : geometry)
    if (g.slices < 1 || !valid_spacing(g.in_plane_mm) || !valid_spacing(g.thickness_mm))
      throw InvalidArgument("sequence geometry needs >= 1 slice and positive spacing");
  for (const auto &table : intensities)
    for (const double v : table)
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidArgument("tissue intensities must be finite and >= 0");
}

const SequenceImage &Patient::sequence(SequenceKind kind) const {
  switch (sequence_slot(kind)) {
  case 0:
    return bssfp;
  case 1:
    return lge;
  default:
    return t2;
  }
}

SequenceImage render_sequence(const PhantomSpec &spec, SequenceKind kind,
                              LabelMap *scar_mask) {
  spec.validate();
  const std::size_t slot = sequence_slot(kind);
  const SequenceGeometry &g = spec.geometry[slot];
  const TissueIntensities &table = spec.intensities[slot];
  const BiasSpec &bias = spec.bias[slot];
  const int n = native_extent(spec, g.in_plane_mm);
  const Spacing3 spacing{g.in_plane_mm, g.in_plane_mm, g.thickness_mm};
  const double to_reference = g.in_plane_mm / acquisition::kCommonSpacingMm;
  const double c = (n - 1) / 2.0;

  SequenceImage out{{Image3D<float>(n, n, g.slices, spacing), kind, spec.patient_id},
                    LabelMap(n, n, g.slices, spacing)};
  if (scar_mask)
    *scar_mask = LabelMap(n, n, g.slices, spacing);
  Rng rng(derive_seed(spec.seed, slot));

  for (int z = 0; z < g.slices; ++z) {
    const Section sec = section_at(spec, (z + 0.5) / g.slices);
    for (int y = 0; y < n; ++y) {
      const double dy = (y - c) * to_reference;
      for (int x = 0; x < n; ++x) {
        const double dx = (x - c) * to_reference;
        const Tissue t = tissue_at(spec, sec, dx, dy);
        out.labels(x, y, z) = label_of(t);
        if (scar_mask && t == Tissue::Scar)
          (*scar_mask)(x, y, z) = 1;
        double value = table[static_cast<std::size_t>(t)];
        if (bias.cx != 0.0 || bias.cy != 0.0)
          value *= std::exp(bias.cx * unit_coord(x, n) + bias.cy * unit_coord(y, n));
        if (spec.noise_sigma > 0.0)
          value = std::abs(value + spec.noise_sigma * rng.normal());
        out.volume.image(x, y, z) = static_cast<float>(value);
      }
    }
  }
  return out;
}

Patient generate_patient(const PhantomSpec &spec) {
  spec.validate();
  Patient p;
  p.patient_id = spec.patient_id;
  p.bssfp = render_sequence(spec, SequenceKind::bSSFP);
  p.lge = render_sequence(spec, SequenceKind::LGE, &p.scar_mask);
  p.t2 = render_sequence(spec, SequenceKind::T2);
  return p;
}

std::vector<CohortRecord> generate_cohort(int n_patients, std::uint64_t base_seed,
                                          const CohortOptions &options) {
  if (n_patients < 1)
    throw InvalidArgument("cohort needs at least one patient");
  const auto proportion = [&](int requested, int reference) {
    if (requested >= 0)
      return std::min(requested, n_patients);
    return static_cast<int>(std::ceil(static_cast<double>(n_patients) * reference /
                                      acquisition::kCohortPatients));
  };
  const int labeled_bssfp = proportion(options.labeled_bssfp,
                                       acquisition::kBSSFP.segmented_patients);
  const int labeled_lge = proportion(options.labeled_lge,
                                     acquisition::kLGE.segmented_patients);
  const int labeled_t2 = proportion(options.labeled_t2,
                                    acquisition::kT2.segmented_patients);

  const double size = options.image_size;
  std::vector<CohortRecord> cohort;
  cohort.reserve(static_cast<std::size_t>(n_patients));
  for (int i = 0; i < n_patients; ++i) {
    Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    PhantomSpec s;
    s.patient_id = patient_name(i);
    s.image_size = options.image_size;
    s.r_lv = rng.uniform(0.07, 0.10) * size;
    s.r_epi = s.r_lv + rng.uniform(0.035, 0.05) * size;
    s.rv_radius = rng.uniform(0.09, 0.12) * size;
    s.scar_start_deg = rng.uniform(0.0, 360.0);
    s.scar_extent_deg = rng.uniform(30.0, 90.0);
    s.noise_sigma = options.noise_sigma;
    for (auto &b : s.bias)
      b = {rng.uniform(-options.max_bias, options.max_bias),
           rng.uniform(-options.max_bias, options.max_bias)};
    const auto thickness = [&](const acquisition::SequenceProtocol &p) {
      return std::round(rng.uniform(p.thickness_min_mm, p.thickness_max_mm) * 2.0) / 2.0;
    };
    const auto slices = [&](const acquisition::SequenceProtocol &p) {
      return rng.uniform_int(p.slices_min, p.slices_max);
    };
    s.geometry[0] = {acquisition::kBSSFP.in_plane_mm, thickness(acquisition::kBSSFP),
                     slices(acquisition::kBSSFP)};
    s.geometry[1] = {acquisition::kLGE.in_plane_mm, thickness(acquisition::kLGE),
                     slices(acquisition::kLGE)};
    s.geometry[2] = {acquisition::kT2.in_plane_mm, thickness(acquisition::kT2),
                     slices(acquisition::kT2)};
    s.seed = rng.next();
    s.validate();
    cohort.push_back({std::move(s),
                      {{SequenceKind::bSSFP, i < labeled_bssfp},
                       {SequenceKind::LGE, i < labeled_lge},
                       {SequenceKind::T2, i < labeled_t2}}});
  }
  return cohort;
}

CohortManifest write_cohort(const std::vector<CohortRecord> &cohort,
                            std::uint64_t base_seed,
                            const std::filesystem::path &dir,
                            const WriteOptions &options) {
  const std::string ext = options.gzip ? ".nii.gz" : ".nii";
  CohortManifest manifest{base_seed, std::vector<CohortPatient>(cohort.size())};
  std::filesystem::create_directories(dir);

  parallel_for(cohort.size(), options.threads, [&](std::size_t i) {
    const CohortRecord &rec = cohort[i];
    const std::string &id = rec.spec.patient_id;
    std::filesystem::create_directories(dir / id);
    const Patient p = generate_patient(rec.spec);
    CohortPatient entry{id, {}, id + "/LGE_scar" + ext};
    for (const SequenceKind kind : acquisition::kAcquired) {
      const std::string name(to_string(kind));
      const SequenceImage &img = p.sequence(kind);
      const std::string image = id + "/" + name + ext;
      const std::string labels = id + "/" + name + "_labels" + ext;
      nifti::write_volume(img.volume, dir / image);
      nifti::write_label_map(img.labels, dir / labels);
      const auto it = rec.labeled.find(kind);
      entry.sequences[kind] = {image, labels, it != rec.labeled.end() && it->second};
    }
    nifti::write_label_map(p.scar_mask, dir / *entry.scar_mask);
    manifest.patients[i] = std::move(entry);
  });

  write_cohort_manifest(manifest, dir / "cohort.json");
  return manifest;
}

} // namespace cmr::phantom
