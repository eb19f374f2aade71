#include <doctest.h>

#include <json.hpp>
#include <set>

#include "cmr/dataset_builder.hpp"
#include "cmr/phantom.hpp"
#include "support/cohort.hpp"

using namespace cmr;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i)
    v.push_back("p" + std::to_string(100 + i));
  return v;
}

// Five patients, LGE labelled for all of them, 12 LGE slices each.
CohortManifest small_cohort(const fs::path &dir) {
  std::vector<phantom::CohortRecord> recs;
  for (int i = 0; i < 5; ++i) {
    phantom::PhantomSpec s;
    s.patient_id = "case" + std::to_string(i);
    s.image_size = 48;
    s.r_lv = 8.0;
    s.r_epi = 14.0;
    s.rv_radius = 10.0;
    s.seed = static_cast<std::uint64_t>(i);
    s.scar_start_deg = 50.0 * i;
    recs.push_back({s,
                    {{SequenceKind::bSSFP, i < 4},
                     {SequenceKind::LGE, true},
                     {SequenceKind::T2, i % 2 == 0}}});
  }
  return phantom::write_cohort(recs, 1, dir);
}

std::size_t count(const DatasetManifest &m, SequenceKind seq, ProvenanceKind prov) {
  return static_cast<std::size_t>(std::count_if(m.records.begin(), m.records.end(), [&](auto &r) {
    return r.sequence == seq && r.provenance.kind == prov;
  }));
}

} // namespace

TEST_CASE("validation counts") {
  CHECK(dataset::validation_count(45, 0.2) == 9);
  CHECK(dataset::validation_count(5, 0.2) == 1);
  CHECK(dataset::validation_count(35, 0.2) == 7);
  CHECK(dataset::validation_count(2, 0.2) == 1);
  CHECK(dataset::validation_count(10, 0.99) == 9);
}

TEST_CASE("patient split sizes, disjointness and determinism") {
  for (const int n : {45, 5}) {
    const auto s = dataset::split_patients(ids(n), 0.2, 3);
    CHECK(s.val.size() == static_cast<std::size_t>(n == 45 ? 9 : 1));
    CHECK(s.train.size() == static_cast<std::size_t>(n == 45 ? 36 : 4));
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    CHECK(all.size() == static_cast<std::size_t>(n));
    CHECK(std::is_sorted(s.val.begin(), s.val.end()));
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  }
  auto shuffled = ids(45);
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(dataset::split_patients(shuffled, 0.2, 3).val ==
        dataset::split_patients(ids(45), 0.2, 3).val);
  CHECK_FALSE(dataset::split_patients(ids(45), 0.2, 3).val ==
              dataset::split_patients(ids(45), 0.2, 4).val);
  CHECK_THROWS_AS(dataset::split_patients(ids(1)), InvalidArgument);
  CHECK_THROWS_AS(dataset::split_patients({"a", "a", "b"}), InvalidArgument);
}

TEST_CASE("configuration flags") {
  const auto c1 = dataset::TrainingConfig::from_id(1);
  CHECK_FALSE(c1.include_bssfp);
  const auto c3 = dataset::TrainingConfig::from_id(3);
  CHECK(c3.include_bssfp);
  CHECK(c3.include_t2);
  CHECK_FALSE(c3.include_scar_rotations);
  const auto c8 = dataset::TrainingConfig::from_id(8);
  CHECK(c8.include_scar_rotations);
  CHECK(c8.include_synthetic_lge);
  const auto c5 = dataset::TrainingConfig::from_id(5);
  CHECK(c5.include_synthetic_lge);
  CHECK_FALSE(c5.include_bssfp);
  for (const int bad : {0, 9, -1}) {
    try {
      dataset::TrainingConfig::from_id(bad);
      FAIL("expected ConfigError");
    } catch (const dataset::ConfigError &e) {
      CHECK(e.option() == "config");
    }
  }
}

TEST_CASE("cohort split stratifies labelled sequences") {
  const auto cohort_recs = phantom::generate_cohort(45, 5);
  CohortManifest c;
  for (const auto &r : cohort_recs) {
    CohortPatient p{r.spec.patient_id, {}, std::nullopt};
    for (const auto &[seq, lab] : r.labeled)
      p.sequences[seq] = {"x", "y", lab};
    c.patients.push_back(p);
  }
  const auto split = dataset::cohort_split(c, 0.2, 9);
  int val = 0, lge_val = 0, bssfp_val = 0;
  for (const auto &p : c.patients) {
    const bool v = split.at(p.patient_id) == Split::Val;
    val += v;
    lge_val += v && p.sequences.at(SequenceKind::LGE).labeled;
    bssfp_val += v && p.sequences.at(SequenceKind::bSSFP).labeled;
  }
  CHECK(val == 9);
  CHECK(lge_val == 1);
  CHECK(bssfp_val == 7);
  CHECK(dataset::cohort_split(c, 0.2, 9) == split);
}

TEST_CASE("config 1 lists every labelled LGE slice") {
  support::TempDir tmp("builder1");
  small_cohort(tmp / "cohort");
  Diagnostics diag;
  const auto m = dataset::build(dataset::TrainingConfig::from_id(1), tmp / "cohort/cohort.json",
                                std::nullopt, 0, tmp / "out", {}, &diag);
  CHECK(m.config_id == 1);
  CHECK(m.records.size() == 60);
  CHECK(count(m, SequenceKind::LGE, ProvenanceKind::Real) == 60);
  for (const auto &r : m.records) {
    CHECK(fs::exists(tmp / "out" / r.image_path));
    CHECK(fs::exists(tmp / "out" / r.label_path));
  }
  CHECK(read_manifest(tmp / "out/manifest.json") == m);

  const auto one = nifti::read_volume(tmp / "out" / m.records[0].image_path, SequenceKind::LGE,
                                      m.records[0].patient_id);
  CHECK(one.nz() == 1);

  const auto sum = dataset::summarize(m);
  CHECK(sum.rows.size() == 15);
  CHECK(sum.total() == 60);
  const auto j = nlohmann::json::parse(sum.to_json());
  CHECK(j.is_object());
  CHECK(sum.to_text().find("LGE") != std::string::npos);
}

TEST_CASE("rotation configurations add 20 rotated copies per LGE slice") {
  support::TempDir tmp("builder4");
  small_cohort(tmp / "cohort");
  const auto c3 = dataset::build(dataset::TrainingConfig::from_id(3), tmp / "cohort/cohort.json",
                                 std::nullopt, 0, tmp / "c3");
  const auto c4 = dataset::build(dataset::TrainingConfig::from_id(4), tmp / "cohort/cohort.json",
                                 std::nullopt, 0, tmp / "c4");
  CHECK(count(c3, SequenceKind::bSSFP, ProvenanceKind::Real) > 0);
  CHECK(count(c3, SequenceKind::T2, ProvenanceKind::Real) > 0);
  CHECK(count(c4, SequenceKind::LGE, ProvenanceKind::Real) == 60);
  CHECK(count(c4, SequenceKind::LGE, ProvenanceKind::Rotated) == 1200);
  for (const auto &r : c4.records)
    if (r.provenance.kind == ProvenanceKind::Rotated) {
      CHECK(r.provenance.rotation_k >= 1);
      CHECK(r.provenance.rotation_k <= 20);
      CHECK(r.label_path.find("_labels") != std::string::npos);
    }

  dataset::BuildOptions drop;
  drop.drop_original = true;
  const auto d4 = dataset::build(dataset::TrainingConfig::from_id(4), tmp / "cohort/cohort.json",
                                 std::nullopt, 0, tmp / "d4", drop);
  CHECK(count(d4, SequenceKind::LGE, ProvenanceKind::Real) == 0);
  CHECK(count(d4, SequenceKind::LGE, ProvenanceKind::Rotated) == 1200);
}

TEST_CASE("synthetic configurations need a synthetic directory") {
  support::TempDir tmp("builder5");
  small_cohort(tmp / "cohort");
  try {
    dataset::build(dataset::TrainingConfig::from_id(5), tmp / "cohort/cohort.json", std::nullopt,
                   0, tmp / "out");
    FAIL("expected ConfigError");
  } catch (const dataset::ConfigError &e) {
    CHECK(e.option() == "synthetic-dir");
  }

  const auto syn = support::write_synthetic_dir(tmp / "cohort", tmp / "syn");
  const auto m = dataset::build(dataset::TrainingConfig::from_id(5), tmp / "cohort/cohort.json",
                                tmp / "syn", 0, tmp / "out5");
  CHECK(count(m, SequenceKind::SyntheticLGE, ProvenanceKind::Synthetic) > 0);
  CHECK(count(m, SequenceKind::LGE, ProvenanceKind::Real) == 60);
}

TEST_CASE("a train and a val patient never share records") {
  support::TempDir tmp("builder_split");
  small_cohort(tmp / "cohort");
  const auto m = dataset::build(dataset::TrainingConfig::from_id(3), tmp / "cohort/cohort.json",
                                std::nullopt, 7, tmp / "out");
  std::map<std::string, std::set<Split>> sides;
  for (const auto &r : m.records)
    sides[r.patient_id].insert(r.split);
  int val = 0;
  for (const auto &[id, s] : sides) {
    CHECK(s.size() == 1);
    val += *s.begin() == Split::Val;
  }
  CHECK(val == 1);
}
