// Single-file NIfTI-1 (.nii / .nii.gz) reader and writer.
//
// Only the first three dimensions and pixdim[1..3] are interpreted;
// qform/sform orientation is ignored on read.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "cmr/image.hpp"

namespace cmr::nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kDefaultVoxOffset = 352;

enum class DataType : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

int bytes_per_voxel(DataType t);

/// Malformed or unsupported file content. Carries the header field at fault
/// and its byte offset in the (decompressed) stream.
class ParseError : public std::runtime_error {
public:
  ParseError(std::string field, std::size_t offset, std::string detail,
             std::string file = {});
  const std::string &field() const { return field_; }
  std::size_t offset() const { return offset_; }
  const std::string &detail() const { return detail_; }

private:
  std::string field_;
  std::size_t offset_;
  std::string detail_;
};

/// Filesystem failure, with the path that caused it.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Header {
  std::array<std::int16_t, 8> dim{};
  DataType datatype = DataType::Float32;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{};
  float vox_offset = static_cast<float>(kDefaultVoxOffset);
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  bool big_endian = false;

  int nx() const { return dim[1]; }
  int ny() const { return dim[0] >= 2 ? dim[2] : 1; }
  int nz() const { return dim[0] >= 3 ? dim[3] : 1; }
  Spacing3 spacing() const;
};

/// Header plus voxels after scl_slope/scl_inter scaling.
struct Image {
  Header header;
  Image3D<float> voxels;
};

/// External label value -> internal code (0..3).
using LabelRemap = std::map<int, std::uint8_t>;

/// Parses a remap table such as {"200": 2, "500": 1, "600": 3}.
LabelRemap load_label_remap(const std::filesystem::path &json_path);

Image read(const std::filesystem::path &path);
Image parse(std::span<const std::uint8_t> bytes);

Volume read_volume(const std::filesystem::path &path, SequenceKind sequence,
                   std::string patient_id);
/// Values must be integral and, after the optional remap, within {0..3}.
LabelMap read_label_map(const std::filesystem::path &path,
                        const std::optional<LabelRemap> &remap = std::nullopt);

/// Serialised little-endian NIfTI-1 with vox_offset 352, slope 1, intercept 0.
std::vector<std::uint8_t> encode(const Image3D<float> &voxels);
std::vector<std::uint8_t> encode(const LabelMap &labels);

/// Writes float32 (Volume) or uint8 (LabelMap); gzip when the name ends .gz.
void write_volume(const Volume &v, const std::filesystem::path &path);
void write_image(const Image3D<float> &img, const std::filesystem::path &path);
void write_label_map(const LabelMap &labels, const std::filesystem::path &path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path,
                      std::span<const std::uint8_t> bytes);

} // namespace cmr::nifti
