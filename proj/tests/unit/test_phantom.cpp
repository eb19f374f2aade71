#include <doctest.h>

#include <set>

#include "cmr/phantom.hpp"

using namespace cmr;

TEST_CASE("noise-free phantom tissues carry their table intensity") {
  phantom::PhantomSpec spec;
  spec.image_size = 96;
  const auto p = phantom::generate_patient(spec);
  for (const SequenceKind kind : acquisition::kAcquired) {
    const auto &img = p.sequence(kind);
    const auto &table = spec.intensities[phantom::sequence_slot(kind)];
    std::size_t lv = 0;
    for (std::size_t i = 0; i < img.labels.size(); ++i)
      if (img.labels.values()[i] == Label::LV) {
        ++lv;
        CHECK(img.volume.image.values()[i] ==
              static_cast<float>(table[static_cast<std::size_t>(phantom::Tissue::LV)]));
      }
    CHECK(lv > 0);
  }
}

TEST_CASE("scar mask sits inside the LGE myocardium and is bright") {
  phantom::PhantomSpec spec;
  spec.image_size = 96;
  spec.scar_start_deg = 300.0;
  spec.scar_extent_deg = 90.0;
  const auto p = phantom::generate_patient(spec);
  std::size_t scar = 0;
  for (std::size_t i = 0; i < p.scar_mask.size(); ++i)
    if (p.scar_mask.values()[i]) {
      ++scar;
      CHECK(p.lge.labels.values()[i] == Label::MYO);
      CHECK(p.lge.volume.image.values()[i] == 950.0f);
    }
  CHECK(scar > 0);
}

TEST_CASE("scar sector wraps through zero degrees") {
  CHECK(phantom::in_scar_sector(10.0, 330.0, 60.0));
  CHECK(phantom::in_scar_sector(-20.0, 330.0, 60.0));
  CHECK_FALSE(phantom::in_scar_sector(40.0, 330.0, 60.0));
  CHECK(phantom::screen_angle_deg(0.0, -1.0) == doctest::Approx(90.0));
}

TEST_CASE("same spec and seed give identical patients") {
  phantom::PhantomSpec spec;
  spec.image_size = 64;
  spec.noise_sigma = 15.0;
  spec.seed = 42;
  const auto a = phantom::generate_patient(spec);
  const auto b = phantom::generate_patient(spec);
  CHECK(a.lge.volume == b.lge.volume);
  CHECK(a.t2.volume == b.t2.volume);
  spec.seed = 43;
  const auto c = phantom::generate_patient(spec);
  CHECK_FALSE(a.lge.volume == c.lge.volume);
  CHECK(a.lge.labels == c.lge.labels);
}

TEST_CASE("native grids follow each sequence's pixel size") {
  phantom::PhantomSpec spec;
  const auto p = phantom::generate_patient(spec);
  CHECK(p.lge.volume.spacing().x == doctest::Approx(0.75));
  CHECK(p.bssfp.volume.spacing().x == doctest::Approx(1.25));
  CHECK(p.t2.volume.spacing().x == doctest::Approx(1.35));
  CHECK(p.bssfp.volume.nx() == 256);
  CHECK(p.lge.volume.nx() > p.bssfp.volume.nx());
  CHECK(p.t2.volume.nx() < p.bssfp.volume.nx());
}

TEST_CASE("cohort ids, labelled counts and slice ranges") {
  const auto cohort = phantom::generate_cohort(45, 7);
  REQUIRE(cohort.size() == 45);
  CHECK(cohort[0].spec.patient_id == "patient01");
  CHECK(cohort[44].spec.patient_id == "patient45");
  std::set<std::string> ids;
  int bssfp = 0, lge = 0, t2 = 0;
  for (const auto &r : cohort) {
    ids.insert(r.spec.patient_id);
    bssfp += r.labeled.at(SequenceKind::bSSFP);
    lge += r.labeled.at(SequenceKind::LGE);
    t2 += r.labeled.at(SequenceKind::T2);
    const int lge_slices = r.spec.geometry[phantom::sequence_slot(SequenceKind::LGE)].slices;
    CHECK(lge_slices >= 10);
    CHECK(lge_slices <= 18);
    const int t2_slices = r.spec.geometry[phantom::sequence_slot(SequenceKind::T2)].slices;
    CHECK(t2_slices >= 3);
    CHECK(t2_slices <= 7);
  }
  CHECK(ids.size() == 45);
  CHECK(bssfp == 35);
  CHECK(lge == 5);
  CHECK(t2 == 35);

  const auto again = phantom::generate_cohort(45, 7);
  for (std::size_t i = 0; i < cohort.size(); ++i)
    CHECK(again[i].spec.scar_start_deg == cohort[i].spec.scar_start_deg);
}

TEST_CASE("invalid specs are rejected") {
  phantom::PhantomSpec spec;
  spec.r_epi = spec.r_lv - 1.0;
  CHECK_THROWS_AS(phantom::generate_patient(spec), InvalidArgument);
  CHECK_THROWS_AS(phantom::generate_cohort(0, 1), InvalidArgument);
}
