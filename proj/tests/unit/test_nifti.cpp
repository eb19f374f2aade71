#include <doctest.h>

#include <fstream>

#include "cmr/nifti.hpp"
#include "support/cohort.hpp"
#include "support/nifti_fixture.hpp"

using namespace cmr;

namespace {

std::string parse_error_field(const std::vector<std::uint8_t> &bytes) {
  try {
    nifti::parse(bytes);
  } catch (const nifti::ParseError &e) {
    return e.field();
  }
  return "";
}

} // namespace

TEST_CASE("int16 voxels are scaled by slope and intercept") {
  fixture::Spec spec;
  spec.dims = {1, 1, 1};
  spec.scl_slope = 2.0f;
  spec.scl_inter = 1.0f;
  const auto img = nifti::parse(fixture::build(spec, {5.0}));
  CHECK(img.voxels(0, 0, 0) == 11.0f);
}

TEST_CASE("zero slope means unscaled") {
  fixture::Spec spec;
  spec.dims = {2, 1, 1};
  const auto img = nifti::parse(fixture::build(spec, {-7.0, 300.0}));
  CHECK(img.voxels(0, 0, 0) == -7.0f);
  CHECK(img.voxels(1, 0, 0) == 300.0f);
}

TEST_CASE("header fields reach the image") {
  fixture::Spec spec;
  spec.dims = {4, 3, 2};
  spec.pixdim = {0.75f, 0.75f, 5.0f};
  const auto img = nifti::parse(fixture::build(spec, std::vector<double>(24, 1.0)));
  CHECK(img.voxels.nx() == 4);
  CHECK(img.voxels.ny() == 3);
  CHECK(img.voxels.nz() == 2);
  CHECK(img.voxels.spacing() == Spacing3{0.75, 0.75, 5.0});
  CHECK_FALSE(img.header.big_endian);
}

TEST_CASE("big-endian file reads like its little-endian twin") {
  fixture::Spec spec;
  spec.datatype = 16;
  spec.bitpix = 32;
  std::vector<double> v;
  for (int i = 0; i < 24; ++i)
    v.push_back(i * 1.5 - 4.0);
  const auto le = nifti::parse(fixture::build(spec, v));
  spec.big_endian = true;
  const auto be = nifti::parse(fixture::build(spec, v));
  CHECK(be.header.big_endian);
  CHECK(be.voxels == le.voxels);
}

TEST_CASE("unsupported and malformed headers are rejected with the field name") {
  fixture::Spec spec;
  spec.datatype = 64;
  spec.bitpix = 64;
  CHECK(parse_error_field(fixture::build(spec, std::vector<double>(24, 0.0))) == "datatype");

  fixture::Spec bad_magic;
  bad_magic.magic = std::string("ni1\0", 4);
  CHECK(parse_error_field(fixture::build(bad_magic, std::vector<double>(24, 0.0))) == "magic");

  fixture::Spec ok;
  auto bytes = fixture::build(ok, std::vector<double>(24, 0.0));
  bytes.resize(bytes.size() - 2);
  CHECK(parse_error_field(bytes) == "data");

  auto short_header = fixture::build(ok, std::vector<double>(24, 0.0));
  short_header.resize(100);
  CHECK(parse_error_field(short_header) == "sizeof_hdr");

  fixture::Spec zero_dim;
  zero_dim.dims = {4, 0, 2};
  CHECK(parse_error_field(fixture::build(zero_dim, {})).rfind("dim", 0) == 0);

  fixture::Spec bad_pixdim;
  bad_pixdim.pixdim = {1.0f, 0.0f, 1.0f};
  CHECK(parse_error_field(fixture::build(bad_pixdim, std::vector<double>(24, 0.0))) ==
        "pixdim[2]");

  // Negative spacing is read as its magnitude.
  fixture::Spec flipped;
  flipped.pixdim = {1.0f, -2.0f, 1.0f};
  CHECK(nifti::parse(fixture::build(flipped, std::vector<double>(24, 0.0))).voxels.spacing().y ==
        2.0);

  fixture::Spec bad_bitpix;
  bad_bitpix.bitpix = 8;
  CHECK(parse_error_field(fixture::build(bad_bitpix, std::vector<double>(24, 0.0))) ==
        "bitpix");
}

TEST_CASE("volumes and label maps round trip, plain and gzip") {
  support::TempDir tmp("nifti_rt");
  // Spacing is stored as float32, so use values it holds exactly.
  Volume v{Image3D<float>(6, 5, 3, {1.375, 1.375, 12.0}), SequenceKind::T2, "p1"};
  for (std::size_t i = 0; i < v.image.size(); ++i)
    v.image.values()[i] = static_cast<float>(i) * 0.37f - 2.0f;
  LabelMap l(6, 5, 3, {1.375, 1.375, 12.0});
  for (std::size_t i = 0; i < l.size(); ++i)
    l.values()[i] = static_cast<std::uint8_t>(i % 4);

  for (const std::string ext : {".nii", ".nii.gz"}) {
    nifti::write_volume(v, tmp / ("v" + ext));
    nifti::write_label_map(l, tmp / ("l" + ext));
    CHECK(nifti::read_volume(tmp / ("v" + ext), SequenceKind::T2, "p1") == v);
    CHECK(nifti::read_label_map(tmp / ("l" + ext)) == l);
  }
  const auto raw = nifti::read_file_bytes(tmp / "v.nii.gz");
  REQUIRE(raw.size() > 2);
  CHECK(raw[0] == 0x1f);
  CHECK(raw[1] == 0x8b);
}

TEST_CASE("label reads reject codes outside 0..3 unless remapped") {
  support::TempDir tmp("nifti_remap");
  fixture::Spec spec;
  spec.dims = {3, 1, 1};
  const auto bytes = fixture::build(spec, {0.0, 500.0, 200.0});
  nifti::write_file_bytes(tmp / "l.nii", bytes);
  CHECK_THROWS(nifti::read_label_map(tmp / "l.nii"));

  {
    std::ofstream f(tmp / "remap.json");
    f << R"({"500": 2, "200": 1})";
  }
  const auto remap = nifti::load_label_remap(tmp / "remap.json");
  const LabelMap m = nifti::read_label_map(tmp / "l.nii", remap);
  CHECK(m(0, 0, 0) == 0);
  CHECK(m(1, 0, 0) == 2);
  CHECK(m(2, 0, 0) == 1);
}

TEST_CASE("missing file is an IoError") {
  CHECK_THROWS_AS(nifti::read("/nonexistent/volume.nii"), nifti::IoError);
}
