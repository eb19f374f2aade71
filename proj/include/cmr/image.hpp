// Image containers shared by every pipeline stage.
//
// Axis convention: x is the fastest-varying index (columns), y the rows and z
// the slices. Angles are clockwise when a slice is viewed with x to the right
// and y pointing down.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cmr {

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class SequenceKind { bSSFP, LGE, T2, SyntheticLGE, SyntheticBSSFP };

std::string_view to_string(SequenceKind kind);
/// Throws InvalidArgument for names outside the closed set.
SequenceKind parse_sequence(std::string_view name);

/// Label codes used inside the toolkit.
enum Label : std::uint8_t { Background = 0, LV = 1, MYO = 2, RV = 3 };
inline constexpr std::uint8_t kMaxLabel = 3;

struct Spacing2 {
  double x = 1.0;
  double y = 1.0;
  bool operator==(const Spacing2 &) const = default;
};

struct Spacing3 {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;
  bool operator==(const Spacing3 &) const = default;
  Spacing2 in_plane() const { return {x, y}; }
};

inline bool valid_spacing(double s) { return std::isfinite(s) && s > 0.0; }

/// Dense 2D raster with physical pixel spacing.
template <typename T> class Image2D {
public:
  using value_type = T;

  Image2D() = default;
  Image2D(int nx, int ny, Spacing2 spacing = {}, T fill = T{})
      : nx_(nx), ny_(ny), spacing_(spacing) {
    if (nx < 1 || ny < 1)
      throw InvalidArgument("image dimensions must be >= 1, got " +
                            std::to_string(nx) + "x" + std::to_string(ny));
    if (!valid_spacing(spacing.x) || !valid_spacing(spacing.y))
      throw InvalidArgument("pixel spacing must be finite and > 0");
    data_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny),
                 fill);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  Spacing2 spacing() const { return spacing_; }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < nx_ && y < ny_;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(x);
  }

  T &operator()(int x, int y) { return data_[index(x, y)]; }
  const T &operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Image2D &) const = default;

private:
  int nx_ = 0;
  int ny_ = 0;
  Spacing2 spacing_{};
  std::vector<T> data_;
};

/// Dense 3D raster with physical voxel spacing.
template <typename T> class Image3D {
public:
  using value_type = T;

  Image3D() = default;
  Image3D(int nx, int ny, int nz, Spacing3 spacing = {}, T fill = T{})
      : nx_(nx), ny_(ny), nz_(nz), spacing_(spacing) {
    if (nx < 1 || ny < 1 || nz < 1)
      throw InvalidArgument("volume dimensions must be >= 1, got " +
                            std::to_string(nx) + "x" + std::to_string(ny) +
                            "x" + std::to_string(nz));
    if (!valid_spacing(spacing.x) || !valid_spacing(spacing.y) ||
        !valid_spacing(spacing.z))
      throw InvalidArgument("voxel spacing must be finite and > 0");
    data_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                     static_cast<std::size_t>(nz),
                 fill);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::size_t size() const { return data_.size(); }
  std::size_t slice_size() const {
    return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  }
  Spacing3 spacing() const { return spacing_; }

  bool same_shape(const Image3D &o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_;
  }
  template <typename U> bool same_shape(const Image3D<U> &o) const {
    return nx_ == o.nx() && ny_ == o.ny() && nz_ == o.nz();
  }

  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx_ && y < ny_ && z < nz_;
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny_) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(x);
  }

  T &operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const T &operator()(int x, int y, int z) const {
    return data_[index(x, y, z)];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  Image2D<T> slice(int z) const {
    if (z < 0 || z >= nz_)
      throw InvalidArgument("slice index " + std::to_string(z) +
                            " out of range [0," + std::to_string(nz_) + ")");
    Image2D<T> out(nx_, ny_, spacing_.in_plane());
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(
                                     static_cast<std::size_t>(z) * slice_size());
    std::copy(first, first + static_cast<std::ptrdiff_t>(slice_size()),
              out.values().begin());
    return out;
  }

  void set_slice(int z, const Image2D<T> &s) {
    if (z < 0 || z >= nz_ || s.nx() != nx_ || s.ny() != ny_)
      throw InvalidArgument("slice does not fit volume at z=" +
                            std::to_string(z));
    std::copy(s.values().begin(), s.values().end(),
              data_.begin() + static_cast<std::ptrdiff_t>(
                                  static_cast<std::size_t>(z) * slice_size()));
  }

  bool operator==(const Image3D &) const = default;

private:
  int nx_ = 0;
  int ny_ = 0;
  int nz_ = 0;
  Spacing3 spacing_{};
  std::vector<T> data_;
};

using Slice2D = Image2D<float>;
using LabelSlice = Image2D<std::uint8_t>;
using LabelMap = Image3D<std::uint8_t>;

/// Intensity volume of one MR sequence for one patient.
struct Volume {
  Image3D<float> image;
  SequenceKind sequence = SequenceKind::LGE;
  std::string patient_id;

  int nx() const { return image.nx(); }
  int ny() const { return image.ny(); }
  int nz() const { return image.nz(); }
  Spacing3 spacing() const { return image.spacing(); }
  bool operator==(const Volume &) const = default;
};

/// Throws InvalidArgument if any voxel is NaN or infinite.
void require_finite(std::span<const float> values, std::string_view what);
/// Throws InvalidArgument if a voxel is outside {0,1,2,3}.
void require_label_codes(const LabelMap &labels);

} // namespace cmr
