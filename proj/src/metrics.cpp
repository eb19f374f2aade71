#include "cmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cmr::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_dims(const LabelMap &a, const LabelMap &b) {
  if (!a.same_shape(b))
    throw InvalidArgument("label maps differ in size: " + std::to_string(a.nx()) + "x" +
                          std::to_string(a.ny()) + "x" + std::to_string(a.nz()) +
                          " vs " + std::to_string(b.nx()) + "x" +
                          std::to_string(b.ny()) + "x" + std::to_string(b.nz()));
}

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts count(const LabelMap &pred, const LabelMap &gt, std::uint8_t label) {
  require_same_dims(pred, gt);
  Counts c;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_a = p[i] == label;
    const bool in_b = g[i] == label;
    c.a += in_a;
    c.b += in_b;
    c.both += in_a && in_b;
  }
  return c;
}

Image3D<std::uint8_t> binary(const LabelMap &labels, std::uint8_t label) {
  Image3D<std::uint8_t> out(labels.nx(), labels.ny(), labels.nz(), labels.spacing());
  const auto src = labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] == label ? 1 : 0;
  return out;
}

bool any(std::span<const std::uint8_t> v) {
  return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
// f and d are strided views of length n; s is the sample spacing in mm.
struct Envelope {
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f;

  void run(double *data, std::size_t stride, int n, double s) {
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    f.resize(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q)
      f[static_cast<std::size_t>(q)] = data[static_cast<std::size_t>(q) * stride];

    const auto sq = [s](double i) { return (s * i) * (s * i); };
    int k = -1;
    for (int q = 0; q < n; ++q) {
      const double fq = f[static_cast<std::size_t>(q)];
      if (fq == kInf)
        continue;
      for (;;) {
        if (k < 0) {
          k = 0;
          v[0] = q;
          z[0] = -kInf;
          z[1] = kInf;
          break;
        }
        const int p = v[static_cast<std::size_t>(k)];
        const double sect = ((fq + sq(q)) - (f[static_cast<std::size_t>(p)] + sq(p))) /
                            (2.0 * s * s * (q - p));
        if (sect <= z[static_cast<std::size_t>(k)]) {
          --k;
          continue;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = sect;
        z[static_cast<std::size_t>(k) + 1] = kInf;
        break;
      }
    }
    if (k < 0)
      return; // the line has no finite values; leave it at +inf
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[static_cast<std::size_t>(k) + 1] < q)
        ++k;
      const int p = v[static_cast<std::size_t>(k)];
      data[static_cast<std::size_t>(q) * stride] =
          sq(q - p) + f[static_cast<std::size_t>(p)];
    }
  }
};

struct Directed {
  std::vector<double> a_to_b;
  std::vector<double> b_to_a;
};

Directed directed_distances(const Image3D<std::uint8_t> &a,
                            const Image3D<std::uint8_t> &b, Spacing3 spacing,
                            bool in_plane_only) {
  const auto sa = surface_mask(a, in_plane_only);
  const auto sb = surface_mask(b, in_plane_only);
  const auto da = squared_distance_transform(sa, a.nx(), a.ny(), a.nz(), spacing);
  const auto db = squared_distance_transform(sb, a.nx(), a.ny(), a.nz(), spacing);
  Directed d;
  for (std::size_t i = 0; i < sa.size(); ++i)
    if (sa[i])
      d.a_to_b.push_back(std::sqrt(db[i]));
  for (std::size_t i = 0; i < sb.size(); ++i)
    if (sb[i])
      d.b_to_a.push_back(std::sqrt(da[i]));
  return d;
}

// Linear interpolation between order statistics.
double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::pair<double, double> msd_and_hausdorff(const Directed &d,
                                            const SurfaceOptions &options) {
  double sum = 0.0;
  for (const double x : d.a_to_b)
    sum += x;
  for (const double x : d.b_to_a)
    sum += x;
  const double msd = sum / static_cast<double>(d.a_to_b.size() + d.b_to_a.size());
  double hd;
  if (options.hausdorff_percentile) {
    hd = std::max(percentile(d.a_to_b, *options.hausdorff_percentile),
                  percentile(d.b_to_a, *options.hausdorff_percentile));
  } else {
    hd = std::max(*std::max_element(d.a_to_b.begin(), d.a_to_b.end()),
                  *std::max_element(d.b_to_a.begin(), d.b_to_a.end()));
  }
  return {msd, hd};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

} // namespace

double dice(const LabelMap &pred, const LabelMap &gt, std::uint8_t label) {
  const Counts c = count(pred, gt, label);
  if (c.a + c.b == 0)
    return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double jaccard(const LabelMap &pred, const LabelMap &gt, std::uint8_t label) {
  const Counts c = count(pred, gt, label);
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0)
    return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

std::vector<std::uint8_t> surface_mask(const Image3D<std::uint8_t> &mask,
                                       bool in_plane_only) {
  std::vector<std::uint8_t> out(mask.size(), 0);
  const int n[3] = {mask.nx(), mask.ny(), mask.nz()};
  static constexpr int d6[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                   {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int z = 0; z < n[2]; ++z)
    for (int y = 0; y < n[1]; ++y)
      for (int x = 0; x < n[0]; ++x) {
        if (!mask(x, y, z))
          continue;
        bool edge = false;
        for (const auto &d : d6) {
          const int axis = d[0] != 0 ? 0 : d[1] != 0 ? 1 : 2;
          if (n[axis] == 1 || (in_plane_only && axis == 2))
            continue;
          const int qx = x + d[0], qy = y + d[1], qz = z + d[2];
          if (!mask.contains(qx, qy, qz) || !mask(qx, qy, qz)) {
            edge = true;
            break;
          }
        }
        out[mask.index(x, y, z)] = edge;
      }
  return out;
}

std::vector<double> squared_distance_transform(std::span<const std::uint8_t> seeds,
                                               int nx, int ny, int nz,
                                               Spacing3 spacing) {
  const std::size_t sx = static_cast<std::size_t>(nx);
  const std::size_t sxy = sx * static_cast<std::size_t>(ny);
  if (seeds.size() != sxy * static_cast<std::size_t>(nz))
    throw InvalidArgument("seed mask size does not match the grid");
  std::vector<double> d(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i)
    d[i] = seeds[i] ? 0.0 : kInf;

  Envelope env;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      env.run(&d[static_cast<std::size_t>(z) * sxy + static_cast<std::size_t>(y) * sx], 1,
              nx, spacing.x);
  for (int z = 0; z < nz; ++z)
    for (int x = 0; x < nx; ++x)
      env.run(&d[static_cast<std::size_t>(z) * sxy + static_cast<std::size_t>(x)], sx, ny,
              spacing.y);
  if (nz > 1)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        env.run(&d[static_cast<std::size_t>(y) * sx + static_cast<std::size_t>(x)], sxy,
                nz, spacing.z);
  return d;
}

SurfaceDistance surface_distances(const LabelMap &pred, const LabelMap &gt,
                                  std::uint8_t label, Spacing3 spacing,
                                  const SurfaceOptions &options) {
  require_same_dims(pred, gt);
  if (!valid_spacing(spacing.x) || !valid_spacing(spacing.y) || !valid_spacing(spacing.z))
    throw InvalidArgument("voxel spacing must be finite and > 0");
  if (options.hausdorff_percentile &&
      !(*options.hausdorff_percentile >= 0.0 && *options.hausdorff_percentile <= 100.0))
    throw InvalidArgument("Hausdorff percentile must lie in [0, 100]");

  const auto a = binary(pred, label);
  const auto b = binary(gt, label);
  SurfaceDistance out;

  if (options.mode == DistanceMode::Volume3D) {
    if (!any(a.values()) || !any(b.values()))
      return out;
    const auto [msd, hd] =
        msd_and_hausdorff(directed_distances(a, b, spacing, false), options);
    out.msd_mm = msd;
    out.hausdorff_mm = hd;
    return out;
  }

  double msd_sum = 0.0, hd_sum = 0.0;
  for (int z = 0; z < a.nz(); ++z) {
    const auto sa = a.slice(z);
    const auto sb = b.slice(z);
    if (!any(sa.values()) || !any(sb.values()))
      continue;
    Image3D<std::uint8_t> va(a.nx(), a.ny(), 1, spacing), vb(a.nx(), a.ny(), 1, spacing);
    va.set_slice(0, sa);
    vb.set_slice(0, sb);
    const auto [msd, hd] = msd_and_hausdorff(directed_distances(va, vb, spacing, true), options);
    msd_sum += msd;
    hd_sum += hd;
    ++out.slices_used;
  }
  if (out.slices_used > 0) {
    out.msd_mm = msd_sum / out.slices_used;
    out.hausdorff_mm = hd_sum / out.slices_used;
  }
  return out;
}

EvalReport evaluate_case(const LabelMap &pred, const LabelMap &gt, Spacing3 spacing,
                         std::string case_id, const SurfaceOptions &options) {
  require_same_dims(pred, gt);
  EvalReport r;
  r.case_id = std::move(case_id);
  for (std::size_t s = 0; s < kStructures.size(); ++s) {
    const std::uint8_t label = kStructures[s];
    const SurfaceDistance sd = surface_distances(pred, gt, label, spacing, options);
    r.structures[s] = {dice(pred, gt, label), jaccard(pred, gt, label), sd.msd_mm,
                       sd.hausdorff_mm};
  }
  return r;
}

AggregateReport aggregate(std::span<const EvalReport> reports) {
  AggregateReport agg;
  agg.cases = reports.size();
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      MetricSummary &out = agg.structures[s][m];
      double sum = 0.0;
      for (const auto &r : reports) {
        if (const auto &v = r.structures[s][m]) {
          sum += *v;
          ++out.count;
        } else {
          ++out.undefined;
        }
      }
      if (out.count == 0)
        continue;
      out.mean = sum / static_cast<double>(out.count);
      double ss = 0.0;
      for (const auto &r : reports)
        if (const auto &v = r.structures[s][m])
          ss += (*v - out.mean) * (*v - out.mean);
      out.std = std::sqrt(ss / static_cast<double>(out.count));
    }
  return agg;
}

std::string to_json(std::span<const EvalReport> reports, const AggregateReport &agg) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["cases"] = ojson::array();
  for (const auto &r : reports) {
    ojson c;
    c["case_id"] = r.case_id;
    for (std::size_t s = 0; s < 3; ++s) {
      ojson st;
      for (std::size_t m = 0; m < kMetricCount; ++m) {
        const auto &v = r.structures[s][m];
        st[kMetricKeys[m]] = v ? ojson(*v) : ojson(nullptr);
      }
      c[kStructureNames[s]] = st;
    }
    j["cases"].push_back(c);
  }
  ojson a;
  a["cases"] = agg.cases;
  for (std::size_t s = 0; s < 3; ++s) {
    ojson st;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const MetricSummary &ms = agg.structures[s][m];
      ojson e;
      e["mean"] = ms.count ? ojson(ms.mean) : ojson(nullptr);
      e["std"] = ms.count ? ojson(ms.std) : ojson(nullptr);
      e["count"] = ms.count;
      e["undefined"] = ms.undefined;
      st[kMetricKeys[m]] = e;
    }
    a[kStructureNames[s]] = st;
  }
  j["aggregate"] = a;
  return j.dump(2) + "\n";
}

std::string to_table(const AggregateReport &agg) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s|%-17s|%-17s|%-17s|\n", "", "       LV",
                "       MYO", "       RV");
  out << line;
  std::snprintf(line, sizeof line, "%-24s|%8s %8s|%8s %8s|%8s %8s|\n", "", "avg.", "std.",
                "avg.", "std.", "avg.", "std.");
  out << line;
  out << std::string(24, '-') << '|' << std::string(17, '-') << '|'
      << std::string(17, '-') << '|' << std::string(17, '-') << "|\n";
  std::vector<std::string> notes;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::string row = kMetricLabels[m];
    row.resize(24, ' ');
    out << row << '|';
    for (std::size_t s = 0; s < 3; ++s) {
      const MetricSummary &ms = agg.structures[s][m];
      const int digits = m < 2 ? 3 : 2;
      if (ms.count == 0)
        std::snprintf(line, sizeof line, "%8s %8s|", "n/a", "n/a");
      else
        std::snprintf(line, sizeof line, "%8s %8s|", fixed(ms.mean, digits).c_str(),
                      fixed(ms.std, digits).c_str());
      out << line;
      if (ms.undefined > 0)
        notes.push_back(std::string(kStructureNames[s]) + " " + kMetricKeys[m] + ": " +
                        std::to_string(ms.undefined) + " of " +
                        std::to_string(agg.cases) + " cases undefined");
    }
    out << '\n';
  }
  out << "cases: " << agg.cases << '\n';
  for (const auto &n : notes)
    out << "excluded " << n << '\n';
  return out.str();
}

} // namespace cmr::metrics
