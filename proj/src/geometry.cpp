#include "cmr/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace cmr {

namespace {

// Source coordinates this close to the grid edge count as inside; absorbs the
// rounding of trigonometric terms for angles such as 360 degrees.
constexpr double kEdgeTolerance = 1e-9;

struct Rotation {
  double cos_a;
  double sin_a;
};

Rotation rotation_for(double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0.0)
    a += 360.0;
  // Quarter turns are exact so that they permute pixels without resampling.
  if (a == 0.0)
    return {1.0, 0.0};
  if (a == 90.0)
    return {0.0, 1.0};
  if (a == 180.0)
    return {-1.0, 0.0};
  if (a == 270.0)
    return {0.0, -1.0};
  const double r = a * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

double lerp(double a, double b, double t) { return a + t * (b - a); }

bool snap(double &q, int n) {
  if (q < -kEdgeTolerance || q > (n - 1) + kEdgeTolerance)
    return false;
  q = std::clamp(q, 0.0, static_cast<double>(n - 1));
  return true;
}

template <typename T>
double sample_bilinear(const Image2D<T> &s, double qx, double qy) {
  const int x0 = static_cast<int>(std::floor(qx));
  const int y0 = static_cast<int>(std::floor(qy));
  const double fx = qx - x0;
  const double fy = qy - y0;
  const int x1 = std::min(x0 + 1, s.nx() - 1);
  const int y1 = std::min(y0 + 1, s.ny() - 1);
  const double top = lerp(s(x0, y0), s(x1, y0), fx);
  const double bottom = lerp(s(x0, y1), s(x1, y1), fx);
  return lerp(top, bottom, fy);
}

void check_rotation_args(double angle_deg, Point2 c, int nx, int ny) {
  if (!std::isfinite(angle_deg))
    throw InvalidArgument("rotation angle must be finite");
  if (!std::isfinite(c.x) || !std::isfinite(c.y))
    throw InvalidArgument("rotation centre must be finite");
  if (c.x < 0.0 || c.y < 0.0 || c.x > nx - 1 || c.y > ny - 1)
    throw InvalidArgument("rotation centre lies outside the slice");
}

template <typename T>
Image2D<T> rotate_impl(const Image2D<T> &s, double angle_deg, Point2 c,
                       Interp interp) {
  check_rotation_args(angle_deg, c, s.nx(), s.ny());
  const Rotation rot = rotation_for(angle_deg);
  Image2D<T> out(s.nx(), s.ny(), s.spacing());
  for (int y = 0; y < s.ny(); ++y) {
    const double dy = y - c.y;
    for (int x = 0; x < s.nx(); ++x) {
      const double dx = x - c.x;
      // Inverse map: rotate the output position counter-clockwise.
      double qx = c.x + rot.cos_a * dx + rot.sin_a * dy;
      double qy = c.y - rot.sin_a * dx + rot.cos_a * dy;
      if (interp == Interp::Nearest) {
        const int ix = static_cast<int>(std::floor(qx + 0.5));
        const int iy = static_cast<int>(std::floor(qy + 0.5));
        if (s.contains(ix, iy))
          out(x, y) = s(ix, iy);
        continue;
      }
      if (!snap(qx, s.nx()) || !snap(qy, s.ny()))
        continue;
      out(x, y) = static_cast<T>(sample_bilinear(s, qx, qy));
    }
  }
  return out;
}

double source_coordinate(int i, double ratio, int n) {
  return std::clamp((i + 0.5) * ratio - 0.5, 0.0, static_cast<double>(n - 1));
}

} // namespace

Slice2D rotate_slice(const Slice2D &s, double angle_deg, Point2 center,
                     Interp interp) {
  return rotate_impl(s, angle_deg, center, interp);
}

LabelSlice rotate_slice(const LabelSlice &s, double angle_deg, Point2 center) {
  return rotate_impl(s, angle_deg, center, Interp::Nearest);
}

Slice2D gaussian_blur_3x3(const Slice2D &s) {
  if (s.nx() < 3 || s.ny() < 3)
    throw InvalidArgument("gaussian_blur_3x3 needs a slice of at least 3x3");
  static constexpr double w[3] = {1.0, 2.0, 1.0};
  Slice2D out(s.nx(), s.ny(), s.spacing());
  for (int y = 0; y < s.ny(); ++y)
    for (int x = 0; x < s.nx(); ++x) {
      double acc = 0.0;
      for (int j = -1; j <= 1; ++j) {
        const int yy = std::clamp(y + j, 0, s.ny() - 1);
        for (int i = -1; i <= 1; ++i) {
          const int xx = std::clamp(x + i, 0, s.nx() - 1);
          acc += w[i + 1] * w[j + 1] * s(xx, yy);
        }
      }
      out(x, y) = static_cast<float>(acc / 16.0);
    }
  return out;
}

int resampled_extent(int n, double from, double to) {
  return std::max(1, static_cast<int>(std::lround(n * from / to)));
}

Volume resample_bilinear(const Volume &v, Spacing2 target) {
  if (!valid_spacing(target.x) || !valid_spacing(target.y))
    throw InvalidArgument("target spacing must be finite and > 0");
  const Spacing3 sp = v.spacing();
  const int nx = resampled_extent(v.nx(), sp.x, target.x);
  const int ny = resampled_extent(v.ny(), sp.y, target.y);
  const double rx = target.x / sp.x;
  const double ry = target.y / sp.y;

  Volume out{Image3D<float>(nx, ny, v.nz(), {target.x, target.y, sp.z}),
             v.sequence, v.patient_id};
  std::vector<double> qx(static_cast<std::size_t>(nx));
  for (int x = 0; x < nx; ++x)
    qx[static_cast<std::size_t>(x)] = source_coordinate(x, rx, v.nx());

  for (int z = 0; z < v.nz(); ++z)
    for (int y = 0; y < ny; ++y) {
      const double qy = source_coordinate(y, ry, v.ny());
      const int y0 = static_cast<int>(std::floor(qy));
      const int y1 = std::min(y0 + 1, v.ny() - 1);
      const double fy = qy - y0;
      for (int x = 0; x < nx; ++x) {
        const double q = qx[static_cast<std::size_t>(x)];
        const int x0 = static_cast<int>(std::floor(q));
        const int x1 = std::min(x0 + 1, v.nx() - 1);
        const double fx = q - x0;
        const double top = lerp(v.image(x0, y0, z), v.image(x1, y0, z), fx);
        const double bottom = lerp(v.image(x0, y1, z), v.image(x1, y1, z), fx);
        out.image(x, y, z) = static_cast<float>(lerp(top, bottom, fy));
      }
    }
  return out;
}

LabelMap resample_nearest(const LabelMap &labels, Spacing2 target) {
  if (!valid_spacing(target.x) || !valid_spacing(target.y))
    throw InvalidArgument("target spacing must be finite and > 0");
  const Spacing3 sp = labels.spacing();
  const int nx = resampled_extent(labels.nx(), sp.x, target.x);
  const int ny = resampled_extent(labels.ny(), sp.y, target.y);
  const double rx = target.x / sp.x;
  const double ry = target.y / sp.y;
  LabelMap out(nx, ny, labels.nz(), {target.x, target.y, sp.z});
  for (int z = 0; z < labels.nz(); ++z)
    for (int y = 0; y < ny; ++y) {
      const int sy = static_cast<int>(
          std::floor(source_coordinate(y, ry, labels.ny()) + 0.5));
      for (int x = 0; x < nx; ++x) {
        const int sx = static_cast<int>(
            std::floor(source_coordinate(x, rx, labels.nx()) + 0.5));
        out(x, y, z) = labels(sx, sy, z);
      }
    }
  return out;
}

Volume crop_or_pad_center(const Volume &v, int nx, int ny) {
  return {crop_or_pad_center(v.image, nx, ny), v.sequence, v.patient_id};
}

} // namespace cmr
