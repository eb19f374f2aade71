#include "cmr/scar_augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <set>

#include <json.hpp>

namespace cmr::augment {

namespace {

// 8-neighbourhood in clockwise screen order, starting west.
constexpr std::array<std::array<int, 2>, 8> kRing{{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

int ring_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i)
    if (kRing[static_cast<std::size_t>(i)][0] == dx &&
        kRing[static_cast<std::size_t>(i)][1] == dy)
      return i;
  return -1;
}

bool set_at(const LabelSlice &m, int x, int y) {
  return m.contains(x, y) && m(x, y) != 0;
}

LabelSlice select(const LabelSlice &labels, std::initializer_list<std::uint8_t> codes) {
  LabelSlice out(labels.nx(), labels.ny(), labels.spacing());
  for (int y = 0; y < labels.ny(); ++y)
    for (int x = 0; x < labels.nx(); ++x)
      for (const auto c : codes)
        if (labels(x, y) == c)
          out(x, y) = 1;
  return out;
}

bool any(const LabelSlice &m) {
  const auto v = m.values();
  return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
}

double shoelace(const std::vector<Point2> &pts) {
  double area = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 &a = pts[i];
    const Point2 &b = pts[(i + 1) % pts.size()];
    area += a.x * b.y - b.x * a.y;
  }
  return 0.5 * area;
}

// Precomputed per-slice quantities shared by all rotations of one slice.
struct MyocardiumFrame {
  LabelSlice mask;
  Point2 center;
  Slice2D weights;
};

MyocardiumFrame frame_for(const Slice2D &s, const LabelSlice &labels) {
  if (s.nx() != labels.nx() || s.ny() != labels.ny())
    throw InvalidArgument("image and label slice dimensions differ");
  MyocardiumFrame f{epicardial_mask(labels), {}, {}};
  f.center = lv_centroid(labels, f.mask);
  f.weights = blend_weights(f.mask);
  return f;
}

Slice2D composite(const Slice2D &s, const MyocardiumFrame &f, double angle_deg) {
  const Slice2D rotated = rotate_slice(s, angle_deg, f.center, Interp::Bilinear);
  Slice2D out = s;
  for (int y = 0; y < s.ny(); ++y)
    for (int x = 0; x < s.nx(); ++x) {
      const double w = f.weights(x, y);
      if (w == 0.0)
        continue;
      const double orig = s(x, y);
      out(x, y) = static_cast<float>(orig + w * (rotated(x, y) - orig));
    }
  return out;
}

} // namespace

double Contour::perimeter() const {
  double p = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 &a = points[i];
    const Point2 &b = points[(i + 1) % points.size()];
    p += std::hypot(b.x - a.x, b.y - a.y);
  }
  return p;
}

std::vector<Point2> trace_boundary(const LabelSlice &mask) {
  int sx = -1, sy = -1;
  for (int y = 0; y < mask.ny() && sx < 0; ++y)
    for (int x = 0; x < mask.nx(); ++x)
      if (mask(x, y) != 0) {
        sx = x;
        sy = y;
        break;
      }
  if (sx < 0)
    return {};

  std::vector<Point2> points{{static_cast<double>(sx), static_cast<double>(sy)}};
  int cx = sx, cy = sy;
  int back = 0; // the west neighbour of the first raster pixel is background
  const std::size_t limit = 4 * mask.size() + 8;
  std::set<std::array<int, 3>> seen{{sx, sy, back}};
  for (std::size_t step = 0; step < limit; ++step) {
    bool found = false;
    for (int i = 1; i <= 8; ++i) {
      const int idx = (back + i) % 8;
      const int px = cx + kRing[static_cast<std::size_t>(idx)][0];
      const int py = cy + kRing[static_cast<std::size_t>(idx)][1];
      if (!set_at(mask, px, py))
        continue;
      const auto &prev = kRing[static_cast<std::size_t>((idx + 7) % 8)];
      back = ring_index(cx + prev[0] - px, cy + prev[1] - py);
      cx = px;
      cy = py;
      found = true;
      break;
    }
    if (!found)
      break; // isolated pixel
    if (!seen.insert({cx, cy, back}).second)
      break; // back at a visited state: the boundary is closed
    points.push_back({static_cast<double>(cx), static_cast<double>(cy)});
  }
  if (points.size() > 1 && points.back() == points.front())
    points.pop_back();
  return points;
}

std::vector<Point2> canonical_order(std::vector<Point2> points) {
  if (points.size() < 2)
    return points;
  if (shoelace(points) > 0.0) // clockwise on screen
    std::reverse(points.begin(), points.end());
  const auto start = std::min_element(points.begin(), points.end(),
                                      [](const Point2 &a, const Point2 &b) {
                                        if (a.x != b.x)
                                          return a.x > b.x;
                                        return a.y < b.y;
                                      });
  std::rotate(points.begin(), start, points.end());
  return points;
}

LabelSlice largest_component(const LabelSlice &mask, int *components) {
  LabelSlice comp_id_holder(mask.nx(), mask.ny(), mask.spacing());
  std::vector<int> ids(mask.size(), 0);
  int count = 0, best = 0;
  std::size_t best_size = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < mask.ny(); ++y)
    for (int x = 0; x < mask.nx(); ++x) {
      if (mask(x, y) == 0 || ids[mask.index(x, y)] != 0)
        continue;
      ++count;
      std::size_t size = 0;
      ids[mask.index(x, y)] = count;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto [qx, qy] = queue.front();
        queue.pop_front();
        ++size;
        static constexpr int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto &d : d4) {
          const int nx = qx + d[0], ny = qy + d[1];
          if (set_at(mask, nx, ny) && ids[mask.index(nx, ny)] == 0) {
            ids[mask.index(nx, ny)] = count;
            queue.emplace_back(nx, ny);
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best = count;
      }
    }
  if (components)
    *components = count;
  for (std::size_t i = 0; i < ids.size(); ++i)
    comp_id_holder.values()[i] = (best != 0 && ids[i] == best) ? 1 : 0;
  return comp_id_holder;
}

LabelSlice fill_holes(const LabelSlice &mask) {
  LabelSlice outside(mask.nx(), mask.ny(), mask.spacing());
  std::deque<std::pair<int, int>> queue;
  const auto seed = [&](int x, int y) {
    if (mask(x, y) == 0 && outside(x, y) == 0) {
      outside(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < mask.nx(); ++x) {
    seed(x, 0);
    seed(x, mask.ny() - 1);
  }
  for (int y = 0; y < mask.ny(); ++y) {
    seed(0, y);
    seed(mask.nx() - 1, y);
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    static constexpr int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto &d : d4) {
      const int nx = x + d[0], ny = y + d[1];
      if (mask.contains(nx, ny))
        seed(nx, ny);
    }
  }
  LabelSlice out(mask.nx(), mask.ny(), mask.spacing());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = outside.values()[i] ? 0 : 1;
  return out;
}

std::optional<SliceContours> extract_contours(const LabelSlice &labels,
                                              Diagnostics *diag,
                                              const std::string &context) {
  const std::string where = context.empty() ? "slice" : context;
  const LabelSlice lv = select(labels, {Label::LV});
  const LabelSlice myo = select(labels, {Label::MYO});
  if (!any(lv) || !any(myo)) {
    warn(diag, where + ": LV or MYO missing; skipped");
    return std::nullopt;
  }
  int n_union = 0, n_lv = 0;
  const LabelSlice heart = largest_component(select(labels, {Label::LV, Label::MYO}), &n_union);
  const LabelSlice cavity = largest_component(lv, &n_lv);
  if (n_union > 1)
    warn(diag, where + ": LV+MYO has " + std::to_string(n_union) +
                   " components; using the largest");
  if (n_lv > 1)
    warn(diag, where + ": LV has " + std::to_string(n_lv) +
                   " components; using the largest");

  SliceContours c{{ContourKind::Epicardial, canonical_order(trace_boundary(heart))},
                  {ContourKind::Endocardial, canonical_order(trace_boundary(cavity))}};
  if (c.epicardial.points.size() < kMinContourPoints ||
      c.endocardial.points.size() < kMinContourPoints) {
    warn(diag, where + ": contour shorter than " +
                   std::to_string(kMinContourPoints) + " points; skipped");
    return std::nullopt;
  }
  return c;
}

std::optional<SliceContours> extract_contours(const LabelMap &labels, int z,
                                              Diagnostics *diag) {
  return extract_contours(labels.slice(z), diag, "slice " + std::to_string(z));
}

std::vector<Point2> place_landmarks(const Contour &c, int n) {
  if (n < 1)
    throw InvalidArgument("landmark count must be >= 1");
  const double perimeter = c.perimeter();
  if (c.points.size() < 2 || !(perimeter > 0.0))
    throw InvalidArgument("cannot place landmarks on a degenerate contour");

  const std::size_t m = c.points.size();
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  double seg_start = 0.0;
  for (int k = 0; k < n; ++k) {
    const double target = perimeter * k / n;
    for (;;) {
      const Point2 &a = c.points[seg];
      const Point2 &b = c.points[(seg + 1) % m];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      if (target <= seg_start + len || seg + 1 == m) {
        const double t = len > 0.0 ? std::clamp((target - seg_start) / len, 0.0, 1.0) : 0.0;
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        break;
      }
      seg_start += len;
      ++seg;
    }
  }
  return out;
}

std::string LandmarkSet::to_json() const {
  using ojson = nlohmann::ordered_json;
  const auto points = [](const std::vector<Point2> &pts) {
    ojson arr = ojson::array();
    for (const auto &p : pts)
      arr.push_back({p.x, p.y});
    return arr;
  };
  ojson j;
  j["slices"] = ojson::array();
  for (const auto &s : slices) {
    ojson sj;
    sj["z"] = s.z;
    sj["epicardial"] = points(s.epicardial);
    sj["endocardial"] = points(s.endocardial);
    j["slices"].push_back(sj);
  }
  return j.dump(2) + "\n";
}

LandmarkSet build_landmarks(const LabelMap &labels, int n, Diagnostics *diag) {
  LandmarkSet set;
  for (int z = 0; z < labels.nz(); ++z) {
    const auto c = extract_contours(labels, z, diag);
    if (!c)
      continue;
    set.slices.push_back({z, place_landmarks(c->epicardial, n),
                          place_landmarks(c->endocardial, n)});
  }
  return set;
}

// ---------------------------------------------------------------------------

LabelSlice epicardial_mask(const LabelSlice &labels) {
  if (!extract_contours(labels))
    throw InvalidArgument("slice has no valid epicardial contour");
  return fill_holes(largest_component(select(labels, {Label::LV, Label::MYO})));
}

Point2 lv_centroid(const LabelSlice &labels, const LabelSlice &mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < labels.ny(); ++y)
    for (int x = 0; x < labels.nx(); ++x)
      if (labels(x, y) == Label::LV && mask(x, y) != 0) {
        sx += x;
        sy += y;
        ++n;
      }
  if (n == 0)
    throw InvalidArgument("no LV pixels inside the epicardial mask");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

Slice2D blend_weights(const LabelSlice &mask) {
  Slice2D m(mask.nx(), mask.ny(), mask.spacing());
  for (std::size_t i = 0; i < m.size(); ++i)
    m.values()[i] = mask.values()[i] ? 1.0f : 0.0f;
  return gaussian_blur_3x3(m);
}

Slice2D rotate_myocardium(const Slice2D &s, const LabelSlice &labels,
                          double angle_deg) {
  return composite(s, frame_for(s, labels), angle_deg);
}

std::vector<RotatedSlice> generate_rotation_set(const Slice2D &s,
                                                const LabelSlice &labels,
                                                const RotationAugmentation &aug) {
  if (aug.count < 0 || !std::isfinite(aug.angle_step_deg))
    throw InvalidArgument("invalid rotation augmentation parameters");
  const MyocardiumFrame f = frame_for(s, labels);
  std::vector<RotatedSlice> out;
  out.reserve(static_cast<std::size_t>(aug.count) + 1);
  out.push_back({0, 0.0, s});
  for (int k = 1; k <= aug.count; ++k) {
    const double angle = k * aug.angle_step_deg;
    out.push_back({k, angle, composite(s, f, angle)});
  }
  return out;
}

double sample_global_angle(Rng &rng, double max_deg) {
  return rng.uniform(-max_deg, max_deg);
}

GlobalRotation global_rotation(const Slice2D &s, const LabelSlice &labels,
                               std::uint64_t seed, double max_deg) {
  if (s.nx() != labels.nx() || s.ny() != labels.ny())
    throw InvalidArgument("image and label slice dimensions differ");
  Rng rng(seed);
  const double angle = sample_global_angle(rng, max_deg);
  const Point2 c = image_center(s);
  return {angle, rotate_slice(s, angle, c, Interp::Bilinear),
          rotate_slice(labels, angle, c)};
}

} // namespace cmr::augment
