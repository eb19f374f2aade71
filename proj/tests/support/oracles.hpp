// Slow, obviously-correct reference implementations used as test oracles.
// Nothing here shares code with the library beyond the image containers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cmr/image.hpp"

namespace oracle {

using cmr::LabelMap;

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

inline Overlap overlap(const LabelMap &p, const LabelMap &g, std::uint8_t label) {
  Overlap o;
  for (int z = 0; z < p.nz(); ++z)
    for (int y = 0; y < p.ny(); ++y)
      for (int x = 0; x < p.nx(); ++x) {
        const bool a = p(x, y, z) == label;
        const bool b = g(x, y, z) == label;
        if (a)
          ++o.a;
        if (b)
          ++o.b;
        if (a && b)
          ++o.both;
      }
  return o;
}

inline double dice(const Overlap &o) {
  return o.a + o.b == 0 ? 1.0 : 2.0 * double(o.both) / double(o.a + o.b);
}

inline double jaccard(const Overlap &o) {
  const std::size_t u = o.a + o.b - o.both;
  return u == 0 ? 1.0 : double(o.both) / double(u);
}

// A voxel of `label` with a 6-neighbour of another label. Outside the volume
// counts as another label, except along an axis with a single sample.
inline bool is_surface(const LabelMap &m, int x, int y, int z, std::uint8_t label,
                       bool in_plane = false) {
  if (m(x, y, z) != label)
    return false;
  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const auto &d : off) {
    if (d[0] != 0 && m.nx() == 1)
      continue;
    if (d[1] != 0 && m.ny() == 1)
      continue;
    if (d[2] != 0 && (m.nz() == 1 || in_plane))
      continue;
    const int qx = x + d[0], qy = y + d[1], qz = z + d[2];
    if (qx < 0 || qy < 0 || qz < 0 || qx >= m.nx() || qy >= m.ny() || qz >= m.nz())
      return true;
    if (m(qx, qy, qz) != label)
      return true;
  }
  return false;
}

struct Voxel {
  int x, y, z;
};

inline std::vector<Voxel> surface(const LabelMap &m, std::uint8_t label) {
  std::vector<Voxel> out;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x)
        if (is_surface(m, x, y, z, label))
          out.push_back({x, y, z});
  return out;
}

struct SurfaceResult {
  std::optional<double> msd, hausdorff;
};

// All-pairs nearest-surface scan.
inline SurfaceResult surface_all_pairs(const LabelMap &p, const LabelMap &g,
                                       std::uint8_t label, cmr::Spacing3 s) {
  const auto a = surface(p, label);
  const auto b = surface(g, label);
  if (a.empty() || b.empty())
    return {};
  const auto nearest = [&](const Voxel &v, const std::vector<Voxel> &set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &w : set) {
      const double dx = s.x * (v.x - w.x), dy = s.y * (v.y - w.y), dz = s.z * (v.z - w.z);
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return best;
  };
  double sum = 0.0, hd = 0.0;
  for (const auto &v : a) {
    const double d = nearest(v, b);
    sum += d;
    hd = std::max(hd, d);
  }
  for (const auto &v : b) {
    const double d = nearest(v, a);
    sum += d;
    hd = std::max(hd, d);
  }
  return {sum / double(a.size() + b.size()), hd};
}

// cdf[i] = fraction of values with 256 * (v - lo) / (hi - lo) < i + 1;
// the last entry is 1.
inline std::vector<double> cdf(std::span<const float> values, double lo, double hi) {
  std::vector<double> c(256, 0.0);
  for (int i = 0; i < 256; ++i) {
    std::size_t n = 0;
    for (const float v : values)
      if ((v - lo) / (hi - lo) * 256.0 < i + 1)
        ++n;
    c[static_cast<std::size_t>(i)] = double(n) / double(values.size());
  }
  c[255] = 1.0;
  return c;
}

// Bilinear sample with coordinates clamped to the grid.
inline double bilinear_clamped(const cmr::Slice2D &s, double x, double y) {
  x = std::clamp(x, 0.0, double(s.nx() - 1));
  y = std::clamp(y, 0.0, double(s.ny() - 1));
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const int x1 = std::min(x0 + 1, s.nx() - 1), y1 = std::min(y0 + 1, s.ny() - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = s(x0, y0) * (1 - fx) + s(x1, y0) * fx;
  const double bot = s(x0, y1) * (1 - fx) + s(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

struct Moments {
  double mean = 0.0, std = 0.0;
};

template <typename Range> Moments moments(const Range &r) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto v : r) {
    sum += v;
    ++n;
  }
  Moments m;
  m.mean = sum / double(n);
  double ss = 0.0;
  for (const auto v : r)
    ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / double(n));
  return m;
}

// Counter-clockwise screen angle (y down) in degrees.
inline double screen_angle(double dx, double dy) {
  return std::atan2(-dy, dx) * 180.0 / std::numbers::pi;
}

// Signed difference a - b wrapped into (-180, 180].
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0)
    d += 360.0;
  if (d > 180.0)
    d -= 360.0;
  return d;
}

// Circular mean of pixel angles about `c`, weighted by max(0, I - floor)
// over pixels where mask is set.
inline double weighted_angle(const cmr::Slice2D &s, const cmr::LabelSlice &labels,
                             std::uint8_t label, double cx, double cy, double floor) {
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < s.ny(); ++y)
    for (int x = 0; x < s.nx(); ++x) {
      if (labels(x, y) != label)
        continue;
      const double w = std::max(0.0, double(s(x, y)) - floor);
      const double a = screen_angle(x - cx, y - cy) * std::numbers::pi / 180.0;
      sx += w * std::cos(a);
      sy += w * std::sin(a);
    }
  return std::atan2(sy, sx) * 180.0 / std::numbers::pi;
}

} // namespace oracle
