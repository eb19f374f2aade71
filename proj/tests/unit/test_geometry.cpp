#include <doctest.h>

#include "cmr/geometry.hpp"
#include "cmr/random.hpp"

using namespace cmr;

TEST_CASE("hot pixel right of centre moves below it after 90 degrees") {
  Slice2D s(5, 5);
  s(4, 2) = 1.0f;
  const Slice2D r = rotate_slice(s, 90.0, image_center(s));
  CHECK(r(2, 4) == doctest::Approx(1.0).epsilon(1e-9));
  double rest = 0.0;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      if (!(x == 2 && y == 4))
        rest += std::abs(r(x, y));
  CHECK(rest < 1e-9);

  const LabelSlice l = [] {
    LabelSlice m(5, 5);
    m(4, 2) = 3;
    return m;
  }();
  const LabelSlice rl = rotate_slice(l, 90.0, image_center(l));
  CHECK(rl(2, 4) == 3);
}

TEST_CASE("zero rotation is bit-identical and 360 degrees nearly so") {
  Rng rng(3);
  Slice2D s(17, 13);
  for (auto &v : s.values())
    v = static_cast<float>(rng.uniform(0.0, 100.0));
  CHECK(rotate_slice(s, 0.0, {8.0, 6.0}) == s);
  const Slice2D full = rotate_slice(s, 360.0, {8.0, 6.0});
  for (int y = 1; y < 12; ++y)
    for (int x = 1; x < 16; ++x)
      CHECK(full(x, y) == doctest::Approx(s(x, y)).epsilon(1e-4));
}

TEST_CASE("rotation samples outside the slice as zero") {
  Slice2D s(9, 9, {}, 5.0f);
  const Slice2D r = rotate_slice(s, 45.0, image_center(s));
  CHECK(r(0, 0) == 0.0f);
  CHECK(r(4, 4) == doctest::Approx(5.0));
}

TEST_CASE("3x3 blur kernel weights and constant preservation") {
  Slice2D impulse(7, 7);
  impulse(3, 3) = 16.0f;
  const Slice2D b = gaussian_blur_3x3(impulse);
  CHECK(b(3, 3) == doctest::Approx(4.0));
  CHECK(b(2, 3) == doctest::Approx(2.0));
  CHECK(b(3, 4) == doctest::Approx(2.0));
  CHECK(b(2, 2) == doctest::Approx(1.0));
  CHECK(b(4, 4) == doctest::Approx(1.0));
  CHECK(b(1, 3) == 0.0f);

  const Slice2D flat = gaussian_blur_3x3(Slice2D(6, 4, {}, 7.5f));
  for (const float v : flat.values())
    CHECK(v == doctest::Approx(7.5));
}

TEST_CASE("LGE grid resampled from 0.75 mm to 1.25 mm") {
  CHECK(resampled_extent(384, 0.75, 1.25) == 230);
  CHECK(resampled_extent(240, 1.35, 1.25) == 259);
  CHECK(resampled_extent(1, 0.5, 10.0) == 1);

  Volume v{Image3D<float>(384, 20, 2, {0.75, 0.75, 5.0}, 3.0f), SequenceKind::LGE, "p"};
  const Volume r = resample_bilinear(v, {1.25, 1.25});
  CHECK(r.nx() == 230);
  CHECK(r.ny() == 12);
  CHECK(r.nz() == 2);
  CHECK(r.spacing() == Spacing3{1.25, 1.25, 5.0});
  for (const float x : r.image.values())
    CHECK(x == doctest::Approx(3.0));
}

TEST_CASE("linear ramp stays linear under bilinear resampling") {
  Volume v{Image3D<float>(40, 3, 1, {1.0, 1.0, 1.0}), SequenceKind::bSSFP, "p"};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 40; ++x)
      v.image(x, y, 0) = static_cast<float>(x);
  const Volume r = resample_bilinear(v, {2.0, 1.0});
  REQUIRE(r.nx() == 20);
  // Output pixel i samples source (i + 0.5) * 2 - 0.5.
  for (int i = 0; i < 20; ++i)
    CHECK(r.image(i, 1, 0) == doctest::Approx(std::min(2.0 * i + 0.5, 39.0)));
}

TEST_CASE("nearest-neighbour label resampling keeps label codes") {
  LabelMap m(10, 10, 1, {1.0, 1.0, 8.0});
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      m(x, y, 0) = static_cast<std::uint8_t>((x + y) % 4);
  const LabelMap r = resample_nearest(m, {0.5, 0.5});
  CHECK(r.nx() == 20);
  for (const auto v : r.values())
    CHECK(v <= 3);
  CHECK(r(0, 0, 0) == m(0, 0, 0));
  CHECK(r(19, 19, 0) == m(9, 9, 0));
}

TEST_CASE("crop and pad offsets put the odd pixel on the high side") {
  Image3D<float> v(259, 259, 1);
  for (int y = 0; y < 259; ++y)
    for (int x = 0; x < 259; ++x)
      v(x, y, 0) = static_cast<float>(1000 * y + x);
  const auto c = crop_or_pad_center(v, 256, 256);
  CHECK(c(0, 0, 0) == v(1, 1, 0));
  CHECK(c(255, 255, 0) == v(256, 256, 0));

  Image3D<float> small(4, 4, 1, {}, 1.0f);
  const auto p = crop_or_pad_center(small, 7, 7);
  CHECK(p(0, 0, 0) == 0.0f);
  CHECK(p(1, 1, 0) == 1.0f);
  CHECK(p(4, 4, 0) == 1.0f);
  CHECK(p(5, 5, 0) == 0.0f);
  CHECK_THROWS_AS(crop_or_pad_center(small, 0, 3), InvalidArgument);
}
