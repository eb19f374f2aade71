#include <doctest.h>

#include <json.hpp>

#include "cmr/manifest.hpp"
#include "support/cohort.hpp"

using namespace cmr;

namespace {

DatasetManifest sample() {
  DatasetManifest m;
  m.config_id = 4;
  m.seed = 17;
  m.records = {
      {"slices/p1/LGE_z00.nii", "slices/p1/LGE_z00_labels.nii", SequenceKind::LGE,
       Provenance::real(), "p1", Split::Train},
      {"slices/p1/LGE_z00_rot03.nii", "slices/p1/LGE_z00_labels.nii", SequenceKind::LGE,
       Provenance::rotated(3), "p1", Split::Train},
      {"syn/p2.nii", "syn/p2_labels.nii", SequenceKind::SyntheticLGE, Provenance::synthetic(),
       "p2", Split::Val},
  };
  return m;
}

std::string error_path(const std::string &text) {
  try {
    dataset_manifest_from_json(text);
  } catch (const ManifestError &e) {
    return e.json_path();
  }
  return "";
}

} // namespace

TEST_CASE("dataset manifest round trips through JSON") {
  const DatasetManifest m = sample();
  const std::string text = to_json_string(m);
  CHECK(dataset_manifest_from_json(text) == m);
  CHECK(to_json_string(dataset_manifest_from_json(text)) == text);

  const auto j = nlohmann::json::parse(text);
  CHECK(j["records"][1]["provenance"] == "rotated");
  CHECK(j["records"][1]["rotation_k"] == 3);
  CHECK_FALSE(j["records"][0].contains("rotation_k"));
  CHECK(j["records"][2]["split"] == "val");
}

TEST_CASE("bad records name the offending field") {
  auto j = nlohmann::json::parse(to_json_string(sample()));
  j["records"][0]["sequence"] = "FLAIR";
  const std::string path = error_path(j.dump());
  CHECK(path.find("sequence") != std::string::npos);
  CHECK(path.find("/records/0") == 0);

  j = nlohmann::json::parse(to_json_string(sample()));
  j["records"][2]["rotation_k"] = 2;
  CHECK(error_path(j.dump()) == "/records/2/rotation_k");

  j = nlohmann::json::parse(to_json_string(sample()));
  j["records"][1]["split"] = "test";
  CHECK(error_path(j.dump()) == "/records/1/split");

  j = nlohmann::json::parse(to_json_string(sample()));
  j["records"][1]["colour"] = "red";
  CHECK(error_path(j.dump()) == "/records/1/colour");

  j = nlohmann::json::parse(to_json_string(sample()));
  j["config_id"] = 9;
  CHECK(error_path(j.dump()) == "/config_id");

  CHECK_THROWS_AS(dataset_manifest_from_json("{not json"), ManifestError);
}

TEST_CASE("manifest files carry their path in errors") {
  support::TempDir tmp("manifest");
  write_manifest(sample(), tmp / "m.json");
  CHECK(read_manifest(tmp / "m.json") == sample());

  nifti::write_file_bytes(tmp / "bad.json",
                          std::vector<std::uint8_t>{'{', '"', 'x', '"', ':', '1', '}'});
  try {
    read_manifest(tmp / "bad.json");
    FAIL("expected ManifestError");
  } catch (const ManifestError &e) {
    CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
  }
}

TEST_CASE("cohort manifest round trips") {
  CohortManifest c;
  c.base_seed = 99;
  CohortPatient p{"patient01", {}, "patient01/LGE_scar.nii"};
  p.sequences[SequenceKind::LGE] = {"patient01/LGE.nii", "patient01/LGE_labels.nii", true};
  p.sequences[SequenceKind::T2] = {"patient01/T2.nii", "patient01/T2_labels.nii", false};
  c.patients.push_back(p);
  c.patients.push_back({"patient02", {}, std::nullopt});
  CHECK(cohort_manifest_from_json(to_json_string(c)) == c);
}

TEST_CASE("enum names") {
  CHECK(to_string(SequenceKind::SyntheticLGE) == "SyntheticLGE");
  CHECK(parse_sequence("bSSFP") == SequenceKind::bSSFP);
  CHECK_THROWS(parse_sequence("lge"));
  CHECK(to_string(ProvenanceKind::Rotated) == "rotated");
  CHECK(to_string(Split::Val) == "val");
}
