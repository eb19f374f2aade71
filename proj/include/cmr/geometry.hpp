// Per-slice geometric primitives: rotation, 3x3 smoothing, in-plane
// resampling and centred crop/pad.
#pragma once

#include "cmr/image.hpp"

namespace cmr {

enum class Interp { Bilinear, Nearest };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2 &) const = default;
};

/// Rotates a slice by `angle_deg` clockwise (x right, y down) about `center`,
/// given in pixel coordinates. Output pixels whose source falls outside the
/// slice are 0. A zero angle reproduces the input bit for bit.
Slice2D rotate_slice(const Slice2D &s, double angle_deg, Point2 center,
                     Interp interp = Interp::Bilinear);
LabelSlice rotate_slice(const LabelSlice &s, double angle_deg, Point2 center);

/// Geometric centre of the pixel grid, ((nx-1)/2, (ny-1)/2).
template <typename T> Point2 image_center(const Image2D<T> &s) {
  return {(s.nx() - 1) / 2.0, (s.ny() - 1) / 2.0};
}

/// Convolution with [[1,2,1],[2,4,2],[1,2,1]]/16, replicating edge pixels.
Slice2D gaussian_blur_3x3(const Slice2D &s);

/// Bilinear in-plane resampling to a new pixel spacing. Output size is
/// round(n * old / new), at least 1. Pixel centres are aligned, i.e. output
/// pixel i samples the source at (i + 0.5) * new / old - 0.5, clamped to the
/// grid.
Volume resample_bilinear(const Volume &v, Spacing2 target);
/// Same grid mapping as resample_bilinear but nearest-neighbour.
LabelMap resample_nearest(const LabelMap &labels, Spacing2 target);

/// Output dimension for resampling n pixels from `from` to `to` mm.
int resampled_extent(int n, double from, double to);

/// Centres the content in an nx by ny frame. Crops and pads split the
/// difference with the odd pixel on the high-index side; padding is 0.
template <typename T>
Image3D<T> crop_or_pad_center(const Image3D<T> &v, int nx, int ny) {
  if (nx < 1 || ny < 1)
    throw InvalidArgument("crop/pad target must be >= 1");
  Image3D<T> out(nx, ny, v.nz(), v.spacing());
  // Offset of the output origin inside the source frame; negative pads.
  const int ox = (v.nx() - nx) >= 0 ? (v.nx() - nx) / 2 : -((nx - v.nx()) / 2);
  const int oy = (v.ny() - ny) >= 0 ? (v.ny() - ny) / 2 : -((ny - v.ny()) / 2);
  for (int z = 0; z < v.nz(); ++z)
    for (int y = 0; y < ny; ++y) {
      const int sy = y + oy;
      if (sy < 0 || sy >= v.ny())
        continue;
      for (int x = 0; x < nx; ++x) {
        const int sx = x + ox;
        if (sx >= 0 && sx < v.nx())
          out(x, y, z) = v(sx, sy, z);
      }
    }
  return out;
}

Volume crop_or_pad_center(const Volume &v, int nx, int ny);

} // namespace cmr
