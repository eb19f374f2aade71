#include "cmr/preprocess.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "cmr/geometry.hpp"
#include "cmr/nifti.hpp"

namespace cmr::preprocess {

namespace {

double normalized_coord(int i, int n) {
  return n > 1 ? 2.0 * i / (n - 1) - 1.0 : 0.0;
}

// Fills `out` with the monomials x^i y^j, i + j <= degree.
void monomials(double x, double y, int degree, std::vector<double> &out) {
  out.clear();
  for (int total = 0; total <= degree; ++total)
    for (int j = 0; j <= total; ++j)
      out.push_back(std::pow(x, total - j) * std::pow(y, j));
}

std::pair<float, float> value_range(std::span<const float> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

int bin_of(double u) {
  return std::clamp(static_cast<int>(std::floor(u * kHistogramBins)), 0,
                    kHistogramBins - 1);
}

Cdf cdf_of(std::span<const float> v, double lo, double hi) {
  std::array<std::size_t, kHistogramBins> counts{};
  const double range = hi - lo;
  for (const float x : v)
    ++counts[static_cast<std::size_t>(bin_of((x - lo) / range))];
  Cdf cdf{};
  std::size_t running = 0;
  for (int i = 0; i < kHistogramBins; ++i) {
    running += counts[static_cast<std::size_t>(i)];
    cdf[static_cast<std::size_t>(i)] =
        static_cast<double>(running) / static_cast<double>(v.size());
  }
  cdf.back() = 1.0;
  return cdf;
}

// Piecewise-linear CDF through (k/256, F_k) with F_0 = 0, F_{k+1} = cdf[k].
double cdf_at(const Cdf &cdf, double u) {
  const int k = bin_of(u);
  const double below = k == 0 ? 0.0 : cdf[static_cast<std::size_t>(k - 1)];
  const double t = std::clamp(u * kHistogramBins - k, 0.0, 1.0);
  return below + t * (cdf[static_cast<std::size_t>(k)] - below);
}

// Smallest u with cdf_at(cdf, u) >= s.
double inverse_cdf_at(const Cdf &cdf, double s) {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), s);
  const int k = it == cdf.end() ? kHistogramBins - 1
                                : static_cast<int>(it - cdf.begin());
  const double below = k == 0 ? 0.0 : cdf[static_cast<std::size_t>(k - 1)];
  const double above = cdf[static_cast<std::size_t>(k)];
  const double t = above > below ? std::clamp((s - below) / (above - below), 0.0, 1.0)
                                 : 0.0;
  return (k + t) / kHistogramBins;
}

} // namespace

// ---------------------------------------------------------------------------

namespace {
constexpr int kBiasIterations = 6;
constexpr double kTrimSigmas = 2.5;
} // namespace

int bias_term_count(int degree) { return (degree + 1) * (degree + 2) / 2; }

double BiasField::log_field(int x, int y) const {
  std::vector<double> m;
  monomials(normalized_coord(x, nx), normalized_coord(y, ny), degree, m);
  double f = 0.0;
  for (std::size_t i = 0; i < m.size() && i < coefficients.size(); ++i)
    f += coefficients[i] * m[i];
  return f;
}

double BiasField::gain(int x, int y) const {
  if (!fitted)
    return 1.0;
  const double e = std::min(log_field(x, y) - foreground_mean, 50.0);
  return std::max(kMinGain, std::exp(e));
}

double otsu_threshold(std::span<const float> values) {
  if (values.empty())
    throw InvalidArgument("otsu_threshold on empty input");
  const auto [lo, hi] = value_range(values);
  if (!(hi > lo))
    return hi;
  std::array<double, kHistogramBins> hist{};
  const double range = static_cast<double>(hi) - lo;
  for (const float v : values)
    hist[static_cast<std::size_t>(bin_of((v - lo) / range))] += 1.0;

  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int i = 0; i < kHistogramBins; ++i)
    sum_all += i * hist[static_cast<std::size_t>(i)];

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int i = 0; i < kHistogramBins - 1; ++i) {
    w0 += hist[static_cast<std::size_t>(i)];
    sum0 += i * hist[static_cast<std::size_t>(i)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0)
      continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = i;
    }
  }
  // Upper edge of the last background bin.
  return lo + range * (best_bin + 1) / kHistogramBins;
}

BiasCorrection correct_bias(const Volume &v, int degree, Diagnostics *diag) {
  if (degree < 0)
    throw InvalidArgument("bias polynomial degree must be >= 0");
  const auto all = v.image.values();
  if (!(*std::max_element(all.begin(), all.end()) > 0.0f))
    throw InvalidArgument("correct_bias: volume '" + v.patient_id +
                          "' has no positive intensities");

  BiasCorrection result{v, {}};
  const int nx = v.nx(), ny = v.ny();
  const int terms = bias_term_count(degree);
  std::vector<double> m;

  for (int z = 0; z < v.nz(); ++z) {
    const Slice2D s = v.image.slice(z);
    BiasField field{degree, nx, ny, std::vector<double>(static_cast<std::size_t>(terms), 0.0),
                    0.0, false};
    const double threshold = otsu_threshold(s.values());

    struct Sample {
      int x, y;
      double log_value;
    };
    std::vector<Sample> samples;
    double intensity_sum = 0.0;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double value = s(x, y);
        if (!(value > threshold) || value <= 0.0)
          continue;
        intensity_sum += value;
        samples.push_back({x, y, std::log(value + kLogEpsilon)});
      }
    const std::size_t foreground = samples.size();

    if (foreground < static_cast<std::size_t>(terms)) {
      warn(diag, "correct_bias: '" + v.patient_id + "' slice " +
                     std::to_string(z) + " has no usable foreground; unchanged");
      result.fields.push_back(std::move(field));
      continue;
    }

    // Gradient-domain fit: neighbouring foreground pixels give differences of
    // log intensity, which are the field's differences except across tissue
    // edges. Edges are trimmed as outliers. The constant term is free and is
    // fixed by the foreground mean below.
    std::vector<double> fg_log(s.size(), std::numeric_limits<double>::quiet_NaN());
    for (const Sample &p : samples)
      fg_log[s.index(p.x, p.y)] = p.log_value;
    const int free_terms = terms - 1;
    std::vector<double> rows, diffs;
    std::vector<double> m2;
    const auto add_pair = [&](int x0, int y0, int x1, int y1) {
      const double a = fg_log[s.index(x0, y0)], b = fg_log[s.index(x1, y1)];
      if (std::isnan(a) || std::isnan(b))
        return;
      monomials(normalized_coord(x0, nx), normalized_coord(y0, ny), degree, m);
      monomials(normalized_coord(x1, nx), normalized_coord(y1, ny), degree, m2);
      for (int t = 1; t < terms; ++t)
        rows.push_back(m2[static_cast<std::size_t>(t)] - m[static_cast<std::size_t>(t)]);
      diffs.push_back(b - a);
    };
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (x + 1 < nx)
          add_pair(x, y, x + 1, y);
        if (y + 1 < ny)
          add_pair(x, y, x, y + 1);
      }

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(terms);
    if (free_terms > 0 && diffs.size() >= static_cast<std::size_t>(free_terms)) {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>
          design(rows.data(), static_cast<Eigen::Index>(diffs.size()), free_terms);
      const Eigen::Map<const Eigen::VectorXd> d(diffs.data(),
                                                static_cast<Eigen::Index>(diffs.size()));
      Eigen::VectorXd c = Eigen::VectorXd::Zero(free_terms);
      std::vector<double> abs_res(diffs.size());
      for (int iter = 0; iter < kBiasIterations; ++iter) {
        const Eigen::VectorXd res = d - design * c;
        for (std::size_t i = 0; i < abs_res.size(); ++i)
          abs_res[i] = std::abs(res[static_cast<Eigen::Index>(i)]);
        std::vector<double> tmp = abs_res;
        auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
        std::nth_element(tmp.begin(), mid, tmp.end());
        const double cutoff = std::max(kTrimSigmas * 1.4826 * *mid, 1e-9);
        Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(free_terms, free_terms);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(free_terms);
        std::size_t kept = 0;
        for (std::size_t i = 0; i < abs_res.size(); ++i) {
          if (abs_res[i] > cutoff)
            continue;
          const auto row = design.row(static_cast<Eigen::Index>(i));
          normal.noalias() += row.transpose() * row;
          rhs.noalias() += row.transpose() * d[static_cast<Eigen::Index>(i)];
          ++kept;
        }
        if (kept < static_cast<std::size_t>(free_terms))
          break;
        c = normal.ldlt().solve(rhs);
      }
      coef.tail(free_terms) = c;
    }

    field.coefficients.assign(coef.data(), coef.data() + terms);
    double log_mean = 0.0;
    for (const Sample &p : samples)
      log_mean += field.log_field(p.x, p.y);
    field.foreground_mean = log_mean / static_cast<double>(foreground);
    field.fitted = true;

    std::vector<double> corrected(s.size());
    double corrected_sum = 0.0;
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double value = s(x, y);
        const double c = value / field.gain(x, y);
        corrected[s.index(x, y)] = c;
        if (value > threshold && value > 0.0)
          corrected_sum += c;
      }
    const double scale = corrected_sum > 0.0 ? intensity_sum / corrected_sum : 1.0;
    Slice2D out(nx, ny, s.spacing());
    for (std::size_t i = 0; i < corrected.size(); ++i)
      out.values()[i] = static_cast<float>(corrected[i] * scale);
    result.volume.image.set_slice(z, out);
    result.fields.push_back(std::move(field));
  }
  return result;
}

// ---------------------------------------------------------------------------

void ReferenceHistogram::validate() const {
  if (sources.empty())
    throw InvalidArgument("reference histogram has no source volumes");
  double prev = 0.0;
  for (int i = 0; i < kHistogramBins; ++i) {
    const double c = cdf[static_cast<std::size_t>(i)];
    if (!std::isfinite(c) || c < 0.0 || c > 1.0 + 1e-12)
      throw InvalidArgument("reference CDF value out of [0,1] at bin " +
                            std::to_string(i));
    if (c < prev)
      throw InvalidArgument("reference CDF decreases at bin " + std::to_string(i));
    prev = c;
  }
  if (std::abs(cdf.back() - 1.0) > 1e-9)
    throw InvalidArgument("reference CDF must end at 1");
}

std::string ReferenceHistogram::to_json() const {
  nlohmann::ordered_json j;
  j["bins"] = kHistogramBins;
  j["cdf"] = std::vector<double>(cdf.begin(), cdf.end());
  j["sources"] = sources;
  return j.dump(2) + "\n";
}

ReferenceHistogram ReferenceHistogram::from_json(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidArgument(std::string("reference histogram: ") + e.what());
  }
  ReferenceHistogram ref;
  try {
    if (j.at("bins").get<int>() != kHistogramBins)
      throw InvalidArgument("reference histogram must have 256 bins");
    const auto values = j.at("cdf").get<std::vector<double>>();
    if (values.size() != static_cast<std::size_t>(kHistogramBins))
      throw InvalidArgument("reference histogram 'cdf' must hold 256 values");
    std::copy(values.begin(), values.end(), ref.cdf.begin());
    ref.sources = j.at("sources").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception &e) {
    throw InvalidArgument(std::string("reference histogram: ") + e.what());
  }
  ref.validate();
  return ref;
}

void ReferenceHistogram::save(const std::filesystem::path &path) const {
  const std::string text = to_json();
  nifti::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()),
                                          text.size()));
}

ReferenceHistogram ReferenceHistogram::load(const std::filesystem::path &path) {
  const auto bytes = nifti::read_file_bytes(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

Cdf volume_cdf(const Volume &v) {
  const auto values = v.image.values();
  const auto [lo, hi] = value_range(values);
  if (!(hi > lo))
    throw InvalidArgument("volume '" + v.patient_id + "' is constant");
  return cdf_of(values, lo, hi);
}

ReferenceHistogram reference_from_cdfs(std::span<const Cdf> cdfs,
                                       std::vector<std::string> sources) {
  if (cdfs.empty() || cdfs.size() != sources.size())
    throw InvalidArgument("reference histogram needs one source id per CDF");
  ReferenceHistogram ref;
  Cdf sum{};
  for (const Cdf &c : cdfs)
    for (std::size_t i = 0; i < c.size(); ++i)
      sum[i] += c[i];
  const double n = static_cast<double>(cdfs.size());
  for (std::size_t i = 0; i < sum.size(); ++i)
    ref.cdf[i] = sum[i] / n;
  ref.cdf.back() = 1.0;
  ref.sources = std::move(sources);
  return ref;
}

ReferenceHistogram build_reference_histogram(std::span<const Volume> volumes,
                                             Diagnostics *diag) {
  if (volumes.empty())
    throw InvalidArgument("build_reference_histogram needs at least one volume");
  std::vector<Cdf> cdfs;
  std::vector<std::string> sources;
  for (const auto &v : volumes) {
    const auto [lo, hi] = value_range(v.image.values());
    if (!(hi > lo)) {
      warn(diag, "reference histogram: skipping constant volume '" +
                     v.patient_id + "' (" + std::string(to_string(v.sequence)) + ")");
      continue;
    }
    cdfs.push_back(cdf_of(v.image.values(), lo, hi));
    sources.push_back(v.patient_id + ":" + std::string(to_string(v.sequence)));
  }
  if (sources.empty())
    throw InvalidArgument("build_reference_histogram: every volume is constant");
  return reference_from_cdfs(cdfs, std::move(sources));
}

Volume match_histogram(const Volume &v, const ReferenceHistogram &ref,
                       Diagnostics *diag) {
  ref.validate();
  const auto values = v.image.values();
  const auto [lo, hi] = value_range(values);
  if (!(hi > lo)) {
    warn(diag, "match_histogram: volume '" + v.patient_id +
                   "' is constant; returned unchanged");
    return v;
  }
  const double range = static_cast<double>(hi) - lo;
  const Cdf source = cdf_of(values, lo, hi);
  Volume out = v;
  auto dst = out.image.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = (values[i] - lo) / range;
    const double mapped = inverse_cdf_at(ref.cdf, cdf_at(source, u));
    dst[i] = static_cast<float>(lo + mapped * range);
  }
  return out;
}

double cdf_distance(const Volume &v, const Cdf &ref, double lo, double hi) {
  if (!(hi > lo))
    throw InvalidArgument("cdf_distance needs hi > lo");
  const Cdf c = cdf_of(v.image.values(), lo, hi);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    worst = std::max(worst, std::abs(c[i] - ref[i]));
  return worst;
}

// ---------------------------------------------------------------------------

Volume normalize(const Volume &v) {
  const auto values = v.image.values();
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (const float x : values)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0) || !std::isfinite(sd))
    throw InvalidArgument("normalize: volume '" + v.patient_id +
                          "' has zero standard deviation");
  Volume out = v;
  auto dst = out.image.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    dst[i] = static_cast<float>(kTargetMean + kTargetStd * (values[i] - mean) / sd);
  return out;
}

Volume standardize_geometry(const Volume &v, const GeometryTarget &target) {
  return crop_or_pad_center(resample_bilinear(v, target.spacing), target.nx,
                            target.ny);
}

LabelMap standardize_geometry(const LabelMap &labels,
                              const GeometryTarget &target) {
  return crop_or_pad_center(resample_nearest(labels, target.spacing), target.nx,
                            target.ny);
}

} // namespace cmr::preprocess
