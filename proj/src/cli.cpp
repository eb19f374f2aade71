#include "cmr/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmr/dataset_builder.hpp"
#include "cmr/metrics.hpp"
#include "cmr/nifti.hpp"
#include "cmr/parallel.hpp"
#include "cmr/phantom.hpp"
#include "cmr/preprocess.hpp"
#include "cmr/scar_augment.hpp"

#ifndef CMR_FORGE_VERSION
#define CMR_FORGE_VERSION "0.0.0"
#endif

namespace cmr::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Options every subcommand understands.
struct Common {
  fs::path out;
  unsigned threads = 0;
  std::string config_file;
  bool gzip = false;
};

std::string extension(bool gzip) { return gzip ? ".nii.gz" : ".nii"; }

std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

void write_text(const fs::path &path, const std::string &text) {
  nifti::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()),
                                          text.size()));
}

std::string read_text(const fs::path &path) {
  const auto bytes = nifti::read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_run_json(const fs::path &out, const std::string &command, ojson config,
                    ojson seeds, unsigned threads, const Diagnostics &diag) {
  ojson j;
  j["tool"] = kToolName;
  j["version"] = version();
  j["command"] = command;
  j["config"] = std::move(config);
  j["seeds"] = std::move(seeds);
  j["threads"] = threads;
  j["warnings"] = diag.warnings;
  fs::create_directories(out);
  write_text(out / "run.json", j.dump(2) + "\n");
}

void report_warnings(const Diagnostics &diag, std::ostream &err) {
  for (const auto &w : diag.warnings)
    err << "warning: " << w << '\n';
}

void merge(Diagnostics &into, std::vector<Diagnostics> &parts) {
  for (auto &p : parts)
    for (auto &w : p.warnings)
      into.warn(std::move(w));
}

// Runs fn(i, diag_i) in parallel and merges the warnings in index order.
template <typename Fn>
void for_each_job(std::size_t n, unsigned threads, Diagnostics &diag, Fn &&fn) {
  std::vector<Diagnostics> parts(n);
  parallel_for(n, threads, [&](std::size_t i) { fn(i, parts[i]); });
  merge(diag, parts);
}

// Turns a flat JSON object into command-line tokens for `sub`.
std::vector<std::string> config_tokens(const fs::path &file, const CLI::App &sub) {
  ojson j;
  try {
    j = ojson::parse(read_text(file));
  } catch (const ojson::parse_error &e) {
    throw UsageError(file.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object())
    throw UsageError(file.string() + ": config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto &[key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (key == "config-file" || sub.get_option_no_throw(flag) == nullptr)
      throw UsageError(file.string() + ": '" + key + "' is not an option of " +
                       sub.get_name());
    if (value.is_null())
      continue;
    if (value.is_boolean()) {
      tokens.push_back(value.get<bool>() ? flag : flag + "=false");
    } else if (value.is_array()) {
      std::string joined;
      for (const auto &v : value)
        joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else {
      tokens.push_back(flag);
      tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return tokens;
}

std::optional<std::string> find_config_file(const std::vector<std::string> &args) {
  std::optional<std::string> found;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config-file" && i + 1 < args.size())
      found = args[i + 1];
    else if (args[i].rfind("--config-file=", 0) == 0)
      found = args[i].substr(14);
  }
  return found;
}

void add_common(CLI::App *sub, Common &c, bool out_required, bool gzip) {
  auto *out = sub->add_option("--out", c.out, "Output directory");
  if (out_required)
    out->required();
  sub->add_option("--threads", c.threads,
                  "Worker threads (default: $CMR_FORGE_THREADS or CPU count)");
  sub->add_option("--config-file", c.config_file,
                  "JSON file of option values; command-line flags take precedence");
  if (gzip)
    sub->add_flag("--gzip", c.gzip, "Write .nii.gz instead of .nii");
}

unsigned threads_for(const Common &c) {
  try {
    return resolve_threads(c.threads);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
}

// Runs fn, prefixing errors that do not already name a file with `where`.
template <typename Fn> void with_context(const std::string &where, Fn &&fn) {
  try {
    fn();
  } catch (const nifti::ParseError &) {
    throw;
  } catch (const nifti::IoError &) {
    throw;
  } catch (const ManifestError &) {
    throw;
  } catch (const std::exception &e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

struct Command {
  CLI::App *app;
  std::function<void(Diagnostics &)> action;
};

// ---------------------------------------------------------------------------
// phantom

Command add_phantom(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    int patients = acquisition::kCohortPatients;
    std::uint64_t seed = 0;
    int size = acquisition::kCommonSize;
    double noise = 15.0;
    double max_bias = 0.2;
    int labeled_bssfp = -1;
    int labeled_lge = -1;
    int labeled_t2 = -1;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand("phantom", "Generate a synthetic multi-sequence cohort");
  sub->add_option("--patients", a->patients, "Number of patients")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", a->seed, "Cohort seed")->capture_default_str();
  sub->add_option("--size", a->size, "Reference grid size in pixels at 1.25 mm")
      ->capture_default_str()
      ->check(CLI::Range(8, 4096));
  sub->add_option("--noise", a->noise, "Rician-like noise sigma")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--max-bias", a->max_bias, "Largest bias-field coefficient")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--labeled-bssfp", a->labeled_bssfp, "Labelled bSSFP patients (-1: 35/45)");
  sub->add_option("--labeled-lge", a->labeled_lge, "Labelled LGE patients (-1: 5/45)");
  sub->add_option("--labeled-t2", a->labeled_t2, "Labelled T2 patients (-1: 35/45)");
  add_common(sub, c, true, true);

  return {sub, [a, &c, &out](Diagnostics &diag) {
            const unsigned threads = threads_for(c);
            phantom::CohortOptions opt;
            opt.image_size = a->size;
            opt.noise_sigma = a->noise;
            opt.max_bias = a->max_bias;
            opt.labeled_bssfp = a->labeled_bssfp;
            opt.labeled_lge = a->labeled_lge;
            opt.labeled_t2 = a->labeled_t2;
            const auto cohort = phantom::generate_cohort(a->patients, a->seed, opt);
            phantom::write_cohort(cohort, a->seed, c.out, {c.gzip, threads});
            ojson cfg{{"patients", a->patients}, {"seed", a->seed},
                      {"size", a->size},         {"noise", a->noise},
                      {"max-bias", a->max_bias}, {"labeled-bssfp", a->labeled_bssfp},
                      {"labeled-lge", a->labeled_lge}, {"labeled-t2", a->labeled_t2},
                      {"gzip", c.gzip},          {"out", c.out.generic_string()}};
            write_run_json(c.out, "phantom", cfg, {{"cohort", a->seed}}, threads, diag);
            out << "wrote " << cohort.size() << " patients to " << c.out.string() << '\n';
          }};
}

// ---------------------------------------------------------------------------
// preprocess

Command add_preprocess(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    fs::path in;
    std::string scope = "global";
    int bias_degree = 3;
    double spacing = acquisition::kCommonSpacingMm;
    int size = acquisition::kCommonSize;
    std::string reference;
    bool no_bias = false;
    bool no_histogram = false;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand(
      "preprocess", "Bias correction, histogram matching, resampling and normalisation");
  sub->add_option("--in", a->in, "Cohort directory containing cohort.json")->required();
  sub->add_option("--scope", a->scope, "Histogram reference: global or per-sequence")
      ->capture_default_str()
      ->check(CLI::IsMember({"global", "per-sequence"}));
  sub->add_option("--bias-degree", a->bias_degree, "Bias polynomial degree")
      ->capture_default_str()
      ->check(CLI::Range(0, 8));
  sub->add_option("--spacing", a->spacing, "Target in-plane spacing (mm)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--size", a->size, "Target in-plane size (pixels)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--reference", a->reference,
                  "Reference histogram JSON to match against (global scope)");
  sub->add_flag("--no-bias", a->no_bias, "Skip bias correction");
  sub->add_flag("--no-histogram", a->no_histogram, "Skip histogram matching");
  add_common(sub, c, true, false);

  return {sub, [a, &c, &out](Diagnostics &diag) {
    if (!a->reference.empty() && a->scope != "global")
      throw UsageError("--reference requires --scope global");
    if (!a->reference.empty() && a->no_histogram)
      throw UsageError("--reference conflicts with --no-histogram");
    const unsigned threads = threads_for(c);
    const fs::path manifest_path = a->in / "cohort.json";
    const CohortManifest cohort = read_cohort_manifest(manifest_path);

    struct Job {
      std::string patient_id;
      SequenceKind kind;
      CohortSequenceEntry entry;
    };
    std::vector<Job> jobs;
    for (const auto &p : cohort.patients)
      for (const auto &[kind, entry] : p.sequences)
        jobs.push_back({p.patient_id, kind, entry});

    const auto load = [&](const Job &job, Diagnostics &d) {
      Volume v = nifti::read_volume(a->in / job.entry.image, job.kind, job.patient_id);
      if (!a->no_bias)
        v = preprocess::correct_bias(v, a->bias_degree, &d).volume;
      return v;
    };
    const auto key = [&](SequenceKind k) {
      return a->scope == "global" ? std::string("global") : std::string(to_string(k));
    };

    std::map<std::string, preprocess::ReferenceHistogram> refs;
    if (!a->no_histogram && !a->reference.empty()) {
      refs["global"] = preprocess::ReferenceHistogram::load(a->reference);
    } else if (!a->no_histogram) {
      std::vector<std::optional<preprocess::Cdf>> cdfs(jobs.size());
      for_each_job(jobs.size(), threads, diag, [&](std::size_t i, Diagnostics &d) {
        const Volume v = load(jobs[i], d);
        try {
          cdfs[i] = preprocess::volume_cdf(v);
        } catch (const InvalidArgument &) {
          d.warn(jobs[i].entry.image + ": constant volume left out of the reference");
        }
      });
      std::map<std::string, std::pair<std::vector<preprocess::Cdf>, std::vector<std::string>>>
          groups;
      for (std::size_t i = 0; i < jobs.size(); ++i)
        if (cdfs[i]) {
          auto &g = groups[key(jobs[i].kind)];
          g.first.push_back(*cdfs[i]);
          g.second.push_back(jobs[i].patient_id + ":" + std::string(to_string(jobs[i].kind)));
        }
      for (auto &[k, g] : groups)
        refs[k] = preprocess::reference_from_cdfs(g.first, std::move(g.second));
    }

    const preprocess::GeometryTarget target{{a->spacing, a->spacing}, a->size, a->size};
    for_each_job(jobs.size(), threads, diag, [&](std::size_t i, Diagnostics &d) {
      const Job &job = jobs[i];
      with_context(job.entry.image, [&] {
      Volume v = load(job, d);
      if (!a->no_histogram) {
        const auto it = refs.find(key(job.kind));
        if (it == refs.end())
          d.warn(job.entry.image + ": no reference histogram; matching skipped");
        else
          v = preprocess::match_histogram(v, it->second, &d);
      }
      v = preprocess::normalize(preprocess::standardize_geometry(v, target));
      fs::create_directories((c.out / job.entry.image).parent_path());
      nifti::write_volume(v, c.out / job.entry.image);
      const LabelMap labels = nifti::read_label_map(a->in / job.entry.labels);
      nifti::write_label_map(preprocess::standardize_geometry(labels, target),
                             c.out / job.entry.labels);
      });
    });
    for (const auto &p : cohort.patients)
      if (p.scar_mask) {
        const LabelMap scar = nifti::read_label_map(a->in / *p.scar_mask);
        nifti::write_label_map(preprocess::standardize_geometry(scar, target),
                               c.out / *p.scar_mask);
      }
    write_cohort_manifest(cohort, c.out / "cohort.json");
    for (const auto &[k, ref] : refs)
      ref.save(c.out / (k == "global" ? std::string("reference_histogram.json")
                                      : "reference_histogram_" + k + ".json"));

    ojson cfg{{"in", a->in.generic_string()},      {"scope", a->scope},
              {"bias-degree", a->bias_degree},     {"spacing", a->spacing},
              {"size", a->size},                   {"reference", a->reference},
              {"no-bias", a->no_bias},             {"no-histogram", a->no_histogram},
              {"out", c.out.generic_string()}};
    write_run_json(c.out, "preprocess", cfg, {{"cohort", cohort.base_seed}}, threads, diag);
    out << "preprocessed " << jobs.size() << " volumes into " << c.out.string() << '\n';
  }};
}

// ---------------------------------------------------------------------------
// augment

Command add_augment(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    fs::path image;
    fs::path labels;
    double step = 7.2;
    int count = 20;
    std::optional<std::uint64_t> global_seed;
    std::string remap;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand("augment", "Scar rotation set and landmarks for one LGE volume");
  sub->add_option("--image", a->image, "LGE volume")->required();
  sub->add_option("--labels", a->labels, "Label map aligned with the volume")->required();
  sub->add_option("--step", a->step, "Rotation step (degrees, clockwise)")
      ->capture_default_str();
  sub->add_option("--count", a->count, "Number of rotations")
      ->capture_default_str()
      ->check(CLI::Range(0, 1000));
  sub->add_option("--global-seed", a->global_seed,
                  "Also write a global rotation (up to 15 degrees) per slice");
  sub->add_option("--remap", a->remap, "JSON label remap applied on read");
  add_common(sub, c, true, true);

  return {sub, [a, &c, &out](Diagnostics &diag) {
    const unsigned threads = threads_for(c);
    const Volume v = nifti::read_volume(a->image, SequenceKind::LGE, a->image.stem().string());
    std::optional<nifti::LabelRemap> remap;
    if (!a->remap.empty())
      remap = nifti::load_label_remap(a->remap);
    const LabelMap labels = nifti::read_label_map(a->labels, remap);
    if (!v.image.same_shape(labels))
      throw std::runtime_error(a->labels.string() + ": dimensions differ from " +
                               a->image.string());

    const augment::RotationAugmentation aug{a->step, a->count};
    std::vector<Volume> rotated(static_cast<std::size_t>(a->count) + 1, v);
    for_each_job(static_cast<std::size_t>(v.nz()), threads, diag,
                 [&](std::size_t zi, Diagnostics &d) {
                   const int z = static_cast<int>(zi);
                   const LabelSlice l = labels.slice(z);
                   if (!augment::extract_contours(l, &d, "slice " + std::to_string(z)))
                     return;
                   with_context(a->image.string() + " slice " + std::to_string(z), [&] {
                     const auto set = augment::generate_rotation_set(v.image.slice(z), l, aug);
                     for (const auto &r : set)
                       rotated[static_cast<std::size_t>(r.k)].image.set_slice(z, r.image);
                   });
                 });

    fs::create_directories(c.out);
    const std::string ext = extension(c.gzip);
    for (std::size_t k = 0; k < rotated.size(); ++k)
      nifti::write_volume(rotated[k], c.out / ("LGE_rot" + two_digits(static_cast<int>(k)) + ext));
    nifti::write_label_map(labels, c.out / ("labels" + ext));
    write_text(c.out / "landmarks.json", augment::build_landmarks(labels).to_json());

    ojson seeds = ojson::object();
    if (a->global_seed) {
      Volume g = v;
      LabelMap gl = labels;
      ojson angles = ojson::array();
      for (int z = 0; z < v.nz(); ++z) {
        const auto r = augment::global_rotation(v.image.slice(z), labels.slice(z),
                                                derive_seed(*a->global_seed, static_cast<std::uint64_t>(z)));
        g.image.set_slice(z, r.image);
        gl.set_slice(z, r.labels);
        angles.push_back(r.angle_deg);
      }
      nifti::write_volume(g, c.out / ("global" + ext));
      nifti::write_label_map(gl, c.out / ("global_labels" + ext));
      write_text(c.out / "global_rotation.json", ojson{{"angles_deg", angles}}.dump(2) + "\n");
      seeds["global"] = *a->global_seed;
    }

    ojson cfg{{"image", a->image.generic_string()},
              {"labels", a->labels.generic_string()},
              {"step", a->step},
              {"count", a->count},
              {"global-seed", a->global_seed ? ojson(*a->global_seed) : ojson(nullptr)},
              {"remap", a->remap},
              {"gzip", c.gzip},
              {"out", c.out.generic_string()}};
    write_run_json(c.out, "augment", cfg, seeds, threads, diag);
    out << "wrote " << rotated.size() << " volumes to " << c.out.string() << '\n';
  }};
}

// ---------------------------------------------------------------------------
// build-dataset

Command add_build(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    fs::path cohort;
    int config = 0;
    fs::path synthetic_dir;
    std::uint64_t seed = 0;
    bool drop_original = false;
    double val_fraction = dataset::kValFraction;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand("build-dataset", "Assemble one of the 8 training sets");
  sub->add_option("--cohort", a->cohort, "Cohort directory or cohort.json")->required();
  sub->add_option("--config", a->config, "Training configuration 1..8")
      ->required()
      ->check(CLI::Range(1, 8));
  sub->add_option("--synthetic-dir", a->synthetic_dir,
                  "Directory with manifest.json of synthetic LGE volumes (configs 5-8)");
  sub->add_option("--seed", a->seed, "Split seed")->capture_default_str();
  sub->add_flag("--drop-original", a->drop_original,
                "Rotation configs list only the 20 rotated copies of each LGE slice");
  sub->add_option("--val-fraction", a->val_fraction, "Validation fraction of patients")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  add_common(sub, c, true, true);

  return {sub, [a, &c, &out](Diagnostics &diag) {
    const auto config = dataset::TrainingConfig::from_id(a->config);
    if (config.include_synthetic_lge && a->synthetic_dir.empty())
      throw UsageError("--synthetic-dir is required for configuration " +
                       std::to_string(a->config));
    const unsigned threads = threads_for(c);
    const fs::path cohort =
        fs::is_directory(a->cohort) ? a->cohort / "cohort.json" : a->cohort;
    std::optional<fs::path> synthetic;
    if (!a->synthetic_dir.empty())
      synthetic = a->synthetic_dir;
    dataset::BuildOptions opt;
    opt.threads = threads;
    opt.gzip = c.gzip;
    opt.drop_original = a->drop_original;
    opt.val_fraction = a->val_fraction;
    const auto manifest = dataset::build(config, cohort, synthetic, a->seed, c.out, opt, &diag);
    const auto summary = dataset::summarize(manifest);
    write_text(c.out / "summary.txt", summary.to_text());
    write_text(c.out / "summary.json", summary.to_json());

    ojson cfg{{"cohort", a->cohort.generic_string()},
              {"config", a->config},
              {"synthetic-dir", a->synthetic_dir.generic_string()},
              {"seed", a->seed},
              {"drop-original", a->drop_original},
              {"val-fraction", a->val_fraction},
              {"gzip", c.gzip},
              {"out", c.out.generic_string()}};
    write_run_json(c.out, "build-dataset", cfg, {{"split", a->seed}}, threads, diag);
    out << summary.to_text();
  }};
}

// ---------------------------------------------------------------------------
// evaluate

std::vector<fs::path> nifti_files(const fs::path &dir, const std::string &suffix) {
  if (!fs::is_directory(dir))
    throw std::runtime_error(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file())
      continue;
    const std::string name = e.path().filename().string();
    const bool nii = name.ends_with(".nii") || name.ends_with(".nii.gz");
    if (nii && name.ends_with(suffix))
      files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Command add_evaluate(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    fs::path pred;
    fs::path gt;
    bool spacing_from_header = false;
    std::vector<double> spacing;
    std::string mode = "3d";
    std::optional<double> percentile;
    std::string remap;
    std::string suffix;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand("evaluate", "Dice, Jaccard, surface and Hausdorff distances");
  sub->add_option("--pred", a->pred, "Directory of predicted label maps")->required();
  sub->add_option("--gt", a->gt, "Directory of ground-truth label maps")->required();
  sub->add_flag("--spacing-from-header", a->spacing_from_header,
                "Take voxel spacing from the ground-truth headers (default)");
  sub->add_option("--spacing", a->spacing, "Voxel spacing x,y,z in mm")
      ->delimiter(',')
      ->expected(3)
      ->check(CLI::PositiveNumber);
  sub->add_option("--mode", a->mode, "3d, or 2d for per-slice distances averaged")
      ->capture_default_str()
      ->check(CLI::IsMember({"3d", "2d"}));
  sub->add_option("--percentile", a->percentile,
                  "Hausdorff percentile instead of the maximum")
      ->check(CLI::Range(0.0, 100.0));
  sub->add_option("--remap", a->remap, "JSON label remap applied to both inputs");
  sub->add_option("--suffix", a->suffix, "Only files whose name ends with this");
  add_common(sub, c, true, false);

  return {sub, [a, &c, &out](Diagnostics &diag) {
    if (a->spacing_from_header && !a->spacing.empty())
      throw UsageError("--spacing and --spacing-from-header are mutually exclusive");
    const unsigned threads = threads_for(c);
    std::optional<nifti::LabelRemap> remap;
    if (!a->remap.empty())
      remap = nifti::load_label_remap(a->remap);
    const auto files = nifti_files(a->gt, a->suffix);
    if (files.empty())
      throw std::runtime_error(a->gt.string() + ": no NIfTI label maps found");
    for (const auto &f : files)
      if (!fs::exists(a->pred / f))
        throw std::runtime_error((a->pred / f).string() + ": missing prediction for " +
                                 (a->gt / f).string());

    metrics::SurfaceOptions opt;
    opt.mode = a->mode == "2d" ? metrics::DistanceMode::PerSlice2D
                               : metrics::DistanceMode::Volume3D;
    opt.hausdorff_percentile = a->percentile;
    std::vector<metrics::EvalReport> reports(files.size());
    for_each_job(files.size(), threads, diag, [&](std::size_t i, Diagnostics &d) {
      const LabelMap gt = nifti::read_label_map(a->gt / files[i], remap);
      const LabelMap pred = nifti::read_label_map(a->pred / files[i], remap);
      if (!pred.same_shape(gt))
        throw std::runtime_error((a->pred / files[i]).string() +
                                 ": dimensions differ from ground truth");
      Spacing3 spacing = gt.spacing();
      if (!a->spacing.empty())
        spacing = {a->spacing[0], a->spacing[1], a->spacing[2]};
      else if (!(pred.spacing() == gt.spacing()))
        d.warn(files[i].generic_string() + ": prediction spacing differs; using ground truth");
      with_context((a->pred / files[i]).string(), [&] {
        reports[i] = metrics::evaluate_case(pred, gt, spacing, files[i].generic_string(), opt);
      });
    });
    const auto agg = metrics::aggregate(reports);
    fs::create_directories(c.out);
    write_text(c.out / "report.json", metrics::to_json(reports, agg));
    write_text(c.out / "report.txt", metrics::to_table(agg));

    ojson cfg{{"pred", a->pred.generic_string()},
              {"gt", a->gt.generic_string()},
              {"spacing-from-header", a->spacing.empty()},
              {"spacing", a->spacing},
              {"mode", a->mode},
              {"percentile", a->percentile ? ojson(*a->percentile) : ojson(nullptr)},
              {"remap", a->remap},
              {"suffix", a->suffix},
              {"out", c.out.generic_string()}};
    write_run_json(c.out, "evaluate", cfg, ojson::object(), threads, diag);
    out << metrics::to_table(agg);
  }};
}

// ---------------------------------------------------------------------------
// inspect

ojson inspect_nifti(const fs::path &path) {
  const nifti::Image img = nifti::read(path);
  const auto &h = img.header;
  const auto v = img.voxels.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  ojson j;
  j["kind"] = "nifti";
  j["file"] = path.generic_string();
  j["dims"] = {img.voxels.nx(), img.voxels.ny(), img.voxels.nz()};
  const Spacing3 s = h.spacing();
  j["spacing_mm"] = {s.x, s.y, s.z};
  j["datatype"] = static_cast<int>(h.datatype);
  j["byte_order"] = h.big_endian ? "big" : "little";
  j["min"] = *lo;
  j["max"] = *hi;
  j["mean"] = sum / static_cast<double>(v.size());
  if (std::all_of(v.begin(), v.end(), [](float x) { return x == std::floor(x) && x >= 0 && x < 256; })) {
    std::map<int, std::size_t> counts;
    for (const float x : v)
      ++counts[static_cast<int>(x)];
    ojson c = ojson::object();
    for (const auto &[k, n] : counts)
      c[std::to_string(k)] = n;
    j["value_counts"] = c;
  }
  return j;
}

ojson inspect_json(const fs::path &path) {
  const ojson raw = ojson::parse(read_text(path));
  ojson j;
  j["file"] = path.generic_string();
  if (raw.is_object() && raw.contains("records")) {
    const auto m = read_manifest(path);
    const auto s = dataset::summarize(m);
    j["kind"] = "dataset-manifest";
    j["config_id"] = m.config_id;
    j["seed"] = m.seed;
    j["records"] = m.records.size();
    j["summary"] = ojson::parse(s.to_json());
  } else if (raw.is_object() && raw.contains("patients")) {
    const auto m = read_cohort_manifest(path);
    j["kind"] = "cohort-manifest";
    j["base_seed"] = m.base_seed;
    j["patients"] = m.patients.size();
    ojson labeled = ojson::object();
    for (const auto kind : acquisition::kAcquired) {
      std::size_t n = 0;
      for (const auto &p : m.patients)
        if (const auto it = p.sequences.find(kind); it != p.sequences.end() && it->second.labeled)
          ++n;
      labeled[std::string(to_string(kind))] = n;
    }
    j["labeled"] = labeled;
  } else if (raw.is_object() && raw.contains("cdf")) {
    const auto ref = preprocess::ReferenceHistogram::from_json(raw.dump());
    j["kind"] = "reference-histogram";
    j["sources"] = ref.sources.size();
  } else {
    throw std::runtime_error(path.string() + ": unrecognised JSON document");
  }
  return j;
}

std::string render_text(const ojson &j) {
  std::ostringstream s;
  for (const auto &[k, v] : j.items()) {
    if (k == "summary")
      continue;
    s << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  }
  return s.str();
}

Command add_inspect(CLI::App &root, Common &c, std::ostream &out) {
  struct Args {
    fs::path file;
    bool json = false;
  };
  auto a = std::make_shared<Args>();
  auto *sub = root.add_subcommand("inspect", "Describe a NIfTI file or a manifest");
  sub->add_option("file", a->file, "NIfTI (.nii, .nii.gz) or JSON manifest")->required();
  sub->add_flag("--json", a->json, "Print JSON instead of text");
  add_common(sub, c, false, false);

  return {sub, [a, &c, &out](Diagnostics &diag) {
    const std::string name = a->file.filename().string();
    const ojson j = name.ends_with(".json") ? inspect_json(a->file) : inspect_nifti(a->file);
    if (a->json)
      out << j.dump(2) << '\n';
    else {
      out << render_text(j);
      if (j.contains("summary")) {
        const auto m = read_manifest(a->file);
        out << dataset::summarize(m).to_text();
      }
    }
    if (!c.out.empty()) {
      fs::create_directories(c.out);
      write_text(c.out / "inspect.json", j.dump(2) + "\n");
      write_run_json(c.out, "inspect",
                     ojson{{"file", a->file.generic_string()}, {"json", a->json},
                           {"out", c.out.generic_string()}},
                     ojson::object(), 1, diag);
    }
  }};
}

} // namespace

std::string version() { return CMR_FORGE_VERSION; }

unsigned resolve_threads(unsigned flag) {
  if (flag > 0)
    return flag;
  if (const char *env = std::getenv(kThreadsEnv); env && *env) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096)
      throw std::invalid_argument(std::string(kThreadsEnv) + "='" + env +
                                  "' is not a positive integer");
    return static_cast<unsigned>(v);
  }
  return default_thread_count();
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Cardiac MRI LGE data toolkit", kToolName};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Common common;
  std::vector<Command> commands{
      add_phantom(app, common, out),   add_preprocess(app, common, out),
      add_augment(app, common, out),   add_build(app, common, out),
      add_evaluate(app, common, out),  add_inspect(app, common, out)};

  try {
    std::vector<std::string> argv = args;
    if (const auto file = find_config_file(args); file && !args.empty()) {
      CLI::App *sub = app.get_subcommand_no_throw(args.front());
      if (!sub)
        throw UsageError("--config-file must follow a subcommand");
      auto tokens = config_tokens(*file, *sub);
      argv.insert(argv.begin() + 1, tokens.begin(), tokens.end());
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }

  for (auto &cmd : commands) {
    if (!cmd.app->parsed())
      continue;
    Diagnostics diag;
    try {
      cmd.action(diag);
      report_warnings(diag, err);
      return kOk;
    } catch (const UsageError &e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const dataset::ConfigError &e) {
      err << "error: --" << e.option() << ": " << e.what() << '\n';
      return kUsageError;
    } catch (const std::exception &e) {
      report_warnings(diag, err);
      err << "error: " << e.what() << '\n';
      return kDataError;
    }
  }
  return kUsageError;
}

} // namespace cmr::cli
