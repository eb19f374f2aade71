#include "cmr/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cmr/nifti.hpp"

namespace cmr {

using ojson = nlohmann::ordered_json;

ManifestError::ManifestError(std::string json_path, std::string detail,
                             std::string file)
    : std::runtime_error((file.empty() ? "manifest" : "manifest '" + file + "'") +
                         " at " + (json_path.empty() ? "/" : json_path) + ": " +
                         detail),
      json_path_(std::move(json_path)), detail_(std::move(detail)) {}

std::string_view to_string(ProvenanceKind kind) {
  switch (kind) {
  case ProvenanceKind::Real:
    return "real";
  case ProvenanceKind::Rotated:
    return "rotated";
  case ProvenanceKind::Synthetic:
    return "synthetic";
  }
  return "unknown";
}

std::string_view to_string(Split split) {
  return split == Split::Train ? "train" : "val";
}

namespace {

// Schema checks over an already-parsed JSON document.
class Fields {
public:
  Fields(const ojson &obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj.is_object())
      throw ManifestError(path_, "expected an object");
  }

  void only(std::initializer_list<std::string_view> allowed) const {
    const std::set<std::string_view> ok(allowed);
    for (const auto &[key, _] : obj_.items())
      if (!ok.contains(key))
        throw ManifestError(path_ + "/" + key, "unknown field '" + key + "'");
  }

  const ojson &at(const std::string &key) const {
    const auto it = obj_.find(key);
    if (it == obj_.end())
      throw ManifestError(path_ + "/" + key,
                          "missing required field '" + key + "'");
    return *it;
  }

  bool has(const std::string &key) const { return obj_.contains(key); }

  std::string str(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_string())
      throw ManifestError(path_ + "/" + key,
                          "field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::int64_t integer(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_number_integer())
      throw ManifestError(path_ + "/" + key,
                          "field '" + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_number_unsigned() &&
        !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ManifestError(path_ + "/" + key,
                          "field '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_boolean())
      throw ManifestError(path_ + "/" + key,
                          "field '" + key + "' must be a boolean");
    return v.get<bool>();
  }

  const std::string &path() const { return path_; }

private:
  const ojson &obj_;
  std::string path_;
};

SequenceKind sequence_at(const Fields &f, const std::string &key) {
  try {
    return parse_sequence(f.str(key));
  } catch (const InvalidArgument &e) {
    throw ManifestError(f.path() + "/" + key, e.what());
  }
}

ojson parse_json(const std::string &text) {
  try {
    return ojson::parse(text);
  } catch (const ojson::parse_error &e) {
    throw ManifestError("", std::string("malformed JSON: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path &path) {
  const auto bytes = nifti::read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  nifti::write_file_bytes(
      path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()),
                      text.size()));
}

ojson record_to_json(const ManifestRecord &r) {
  ojson j;
  j["image_path"] = r.image_path;
  j["label_path"] = r.label_path;
  j["sequence"] = std::string(to_string(r.sequence));
  j["provenance"] = std::string(to_string(r.provenance.kind));
  if (r.provenance.kind == ProvenanceKind::Rotated)
    j["rotation_k"] = r.provenance.rotation_k;
  j["patient_id"] = r.patient_id;
  j["split"] = std::string(to_string(r.split));
  return j;
}

ManifestRecord record_from_json(const ojson &j, const std::string &path) {
  const Fields f(j, path);
  f.only({"image_path", "label_path", "sequence", "provenance", "rotation_k",
          "patient_id", "split"});
  ManifestRecord r;
  r.image_path = f.str("image_path");
  r.label_path = f.str("label_path");
  r.sequence = sequence_at(f, "sequence");
  const std::string prov = f.str("provenance");
  if (prov == "real")
    r.provenance = Provenance::real();
  else if (prov == "synthetic")
    r.provenance = Provenance::synthetic();
  else if (prov == "rotated") {
    const auto k = f.integer("rotation_k");
    if (k < 0)
      throw ManifestError(path + "/rotation_k", "rotation_k must be >= 0");
    r.provenance = Provenance::rotated(static_cast<int>(k));
  } else
    throw ManifestError(path + "/provenance",
                        "unknown provenance '" + prov + "'");
  if (prov != "rotated" && f.has("rotation_k"))
    throw ManifestError(path + "/rotation_k",
                        "rotation_k is only valid for rotated records");
  r.patient_id = f.str("patient_id");
  const std::string split = f.str("split");
  if (split == "train")
    r.split = Split::Train;
  else if (split == "val")
    r.split = Split::Val;
  else
    throw ManifestError(path + "/split", "unknown split '" + split + "'");
  return r;
}

} // namespace

std::string to_json_string(const DatasetManifest &m) {
  ojson j;
  j["config_id"] = m.config_id;
  j["seed"] = m.seed;
  j["records"] = ojson::array();
  for (const auto &r : m.records)
    j["records"].push_back(record_to_json(r));
  return j.dump(2) + "\n";
}

DatasetManifest dataset_manifest_from_json(const std::string &text) {
  const ojson j = parse_json(text);
  const Fields f(j, "");
  f.only({"config_id", "seed", "records"});
  DatasetManifest m;
  const auto id = f.integer("config_id");
  if (id < 0 || id > 8)
    throw ManifestError("/config_id", "config_id must be in [0,8]");
  m.config_id = static_cast<int>(id);
  m.seed = f.unsigned_integer("seed");
  const auto &records = f.at("records");
  if (!records.is_array())
    throw ManifestError("/records", "field 'records' must be an array");
  for (std::size_t i = 0; i < records.size(); ++i)
    m.records.push_back(
        record_from_json(records[i], "/records/" + std::to_string(i)));
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path &path) {
  try {
    return dataset_manifest_from_json(read_text(path));
  } catch (const ManifestError &e) {
    throw e.in_file(path);
  }
}

void write_manifest(const DatasetManifest &m,
                    const std::filesystem::path &path) {
  write_text(path, to_json_string(m));
}

std::string to_json_string(const CohortManifest &m) {
  ojson j;
  j["base_seed"] = m.base_seed;
  j["patients"] = ojson::array();
  for (const auto &p : m.patients) {
    ojson pj;
    pj["patient_id"] = p.patient_id;
    ojson seqs = ojson::object();
    for (const auto &[kind, e] : p.sequences) {
      ojson ej;
      ej["image"] = e.image;
      ej["labels"] = e.labels;
      ej["labeled"] = e.labeled;
      seqs[std::string(to_string(kind))] = ej;
    }
    pj["sequences"] = seqs;
    if (p.scar_mask)
      pj["scar_mask"] = *p.scar_mask;
    j["patients"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

CohortManifest cohort_manifest_from_json(const std::string &text) {
  const ojson j = parse_json(text);
  const Fields f(j, "");
  f.only({"base_seed", "patients"});
  CohortManifest m;
  m.base_seed = f.unsigned_integer("base_seed");
  const auto &patients = f.at("patients");
  if (!patients.is_array())
    throw ManifestError("/patients", "field 'patients' must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const std::string path = "/patients/" + std::to_string(i);
    const Fields pf(patients[i], path);
    pf.only({"patient_id", "sequences", "scar_mask"});
    CohortPatient p;
    p.patient_id = pf.str("patient_id");
    if (!seen.insert(p.patient_id).second)
      throw ManifestError(path + "/patient_id",
                          "duplicate patient_id '" + p.patient_id + "'");
    const Fields sf(pf.at("sequences"), path + "/sequences");
    for (const auto &[name, entry] : pf.at("sequences").items()) {
      const std::string epath = path + "/sequences/" + name;
      SequenceKind kind;
      try {
        kind = parse_sequence(name);
      } catch (const InvalidArgument &e) {
        throw ManifestError(epath, e.what());
      }
      const Fields ef(entry, epath);
      ef.only({"image", "labels", "labeled"});
      p.sequences[kind] = {ef.str("image"), ef.str("labels"),
                           ef.boolean("labeled")};
    }
    if (pf.has("scar_mask"))
      p.scar_mask = pf.str("scar_mask");
    m.patients.push_back(std::move(p));
  }
  return m;
}

CohortManifest read_cohort_manifest(const std::filesystem::path &path) {
  try {
    return cohort_manifest_from_json(read_text(path));
  } catch (const ManifestError &e) {
    throw e.in_file(path);
  }
}

void write_cohort_manifest(const CohortManifest &m,
                           const std::filesystem::path &path) {
  write_text(path, to_json_string(m));
}

} // namespace cmr
