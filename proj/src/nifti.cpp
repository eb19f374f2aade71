#include "cmr/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>
#include <zlib.h>

namespace cmr::nifti {

namespace {

// Byte offsets of the NIfTI-1 header fields we touch.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffCalMax = 124;
constexpr std::size_t kOffCalMin = 128;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffMagic = 344;

class Reader {
public:
  Reader(std::span<const std::uint8_t> bytes, bool big_endian)
      : bytes_(bytes), swap_(big_endian != (std::endian::native ==
                                            std::endian::big)) {}

  template <typename T> T get(std::size_t offset) const {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_)
      std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class LittleEndianWriter {
public:
  explicit LittleEndianWriter(std::vector<std::uint8_t> &out) : out_(out) {}

  template <typename T> void put(std::size_t offset, T value) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(raw.begin(), raw.end());
    std::memcpy(out_.data() + offset, raw.data(), sizeof(T));
  }

private:
  std::vector<std::uint8_t> &out_;
};

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw ParseError("gzip", 0, "cannot initialise inflate");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  zs.next_in = const_cast<Bytef *>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw ParseError("gzip", at, "corrupt or truncated gzip stream");
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw ParseError("gzip", zs.total_in, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("cannot initialise deflate");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef *>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw IoError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

bool ends_with_gz(const std::filesystem::path &p) {
  return p.extension() == ".gz";
}

std::vector<std::uint8_t> blank_header(const std::array<std::int16_t, 8> &dim,
                                       DataType type, Spacing3 sp) {
  std::vector<std::uint8_t> out(kDefaultVoxOffset, 0);
  LittleEndianWriter w(out);
  w.put<std::int32_t>(kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  for (std::size_t i = 0; i < 8; ++i)
    w.put<std::int16_t>(kOffDim + 2 * i, dim[i]);
  w.put<std::int16_t>(kOffDatatype, static_cast<std::int16_t>(type));
  w.put<std::int16_t>(kOffBitpix,
                      static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
  const std::array<float, 4> pix{1.0f, static_cast<float>(sp.x),
                                 static_cast<float>(sp.y),
                                 static_cast<float>(sp.z)};
  for (std::size_t i = 0; i < pix.size(); ++i)
    w.put<float>(kOffPixdim + 4 * i, pix[i]);
  w.put<float>(kOffVoxOffset, static_cast<float>(kDefaultVoxOffset));
  w.put<float>(kOffSclSlope, 1.0f);
  w.put<float>(kOffSclInter, 0.0f);
  out[kOffXyztUnits] = 2; // millimetres
  if (type == DataType::UInt8) {
    w.put<float>(kOffCalMax, static_cast<float>(kMaxLabel));
    w.put<float>(kOffCalMin, 0.0f);
  }
  static constexpr char descrip[] = "cmr-forge";
  std::memcpy(out.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
  w.put<std::int16_t>(kOffQformCode, 1);
  static constexpr char magic[4] = {'n', '+', '1', '\0'};
  std::memcpy(out.data() + kOffMagic, magic, 4);
  return out;
}

std::array<std::int16_t, 8> dims_for(int nx, int ny, int nz) {
  auto narrow = [](int v) {
    if (v > std::numeric_limits<std::int16_t>::max())
      throw InvalidArgument("dimension " + std::to_string(v) +
                            " exceeds NIfTI-1 limit of 32767");
    return static_cast<std::int16_t>(v);
  };
  return {3, narrow(nx), narrow(ny), narrow(nz), 1, 1, 1, 1};
}

} // namespace

ParseError::ParseError(std::string field, std::size_t offset,
                       std::string detail, std::string file)
    : std::runtime_error((file.empty() ? std::string() : "'" + file + "': ") +
                         "NIfTI field '" + field + "' at byte " +
                         std::to_string(offset) + ": " + detail),
      field_(std::move(field)), offset_(offset), detail_(std::move(detail)) {}

int bytes_per_voxel(DataType t) {
  switch (t) {
  case DataType::UInt8:
    return 1;
  case DataType::Int16:
    return 2;
  case DataType::Float32:
    return 4;
  }
  return 0;
}

Spacing3 Header::spacing() const {
  const int n = dim[0];
  return {pixdim[1], n >= 2 ? pixdim[2] : 1.0, n >= 3 ? pixdim[3] : 1.0};
}

Image parse(std::span<const std::uint8_t> raw) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> bytes = raw;
  if (is_gzip(raw)) {
    inflated = gunzip(raw);
    bytes = inflated;
  }
  if (bytes.size() < kHeaderSize)
    throw ParseError("sizeof_hdr", 0,
                     "truncated header: " + std::to_string(bytes.size()) +
                         " bytes, need 348");

  Header h;
  {
    const Reader le(bytes, false);
    const Reader be(bytes, true);
    if (le.get<std::int32_t>(kOffSizeofHdr) == 348)
      h.big_endian = false;
    else if (be.get<std::int32_t>(kOffSizeofHdr) == 348)
      h.big_endian = true;
    else
      throw ParseError("sizeof_hdr", kOffSizeofHdr,
                       "expected 348 in either byte order");
  }
  const Reader r(bytes, h.big_endian);

  const char *magic = reinterpret_cast<const char *>(bytes.data() + kOffMagic);
  if (std::memcmp(magic, "ni1\0", 4) == 0)
    throw ParseError("magic", kOffMagic,
                     "two-file (.hdr/.img) NIfTI is not supported");
  if (std::memcmp(magic, "n+1\0", 4) != 0)
    throw ParseError("magic", kOffMagic, "bad magic, expected \"n+1\"");

  for (std::size_t i = 0; i < 8; ++i)
    h.dim[i] = r.get<std::int16_t>(kOffDim + 2 * i);
  if (h.dim[0] < 1 || h.dim[0] > 7)
    throw ParseError("dim[0]", kOffDim,
                     "dimension count " + std::to_string(h.dim[0]) +
                         " outside [1,7]");
  std::size_t count = 1;
  for (int i = 1; i <= h.dim[0]; ++i) {
    if (h.dim[static_cast<std::size_t>(i)] < 1)
      throw ParseError("dim[" + std::to_string(i) + "]",
                       kOffDim + 2 * static_cast<std::size_t>(i),
                       "dimension must be >= 1");
    count *= static_cast<std::size_t>(h.dim[static_cast<std::size_t>(i)]);
    if (i > 3 && h.dim[static_cast<std::size_t>(i)] != 1)
      throw ParseError("dim[" + std::to_string(i) + "]",
                       kOffDim + 2 * static_cast<std::size_t>(i),
                       "only 3D data is supported");
  }

  const auto code = r.get<std::int16_t>(kOffDatatype);
  if (code != 2 && code != 4 && code != 16)
    throw ParseError("datatype", kOffDatatype,
                     "unsupported datatype " + std::to_string(code) +
                         " (supported: 2 uint8, 4 int16, 16 float32)");
  h.datatype = static_cast<DataType>(code);
  h.bitpix = r.get<std::int16_t>(kOffBitpix);
  if (h.bitpix != 8 * bytes_per_voxel(h.datatype))
    throw ParseError("bitpix", kOffBitpix,
                     "bitpix " + std::to_string(h.bitpix) +
                         " inconsistent with datatype " + std::to_string(code));

  for (std::size_t i = 0; i < 8; ++i)
    h.pixdim[i] = r.get<float>(kOffPixdim + 4 * i);
  for (int i = 1; i <= std::min<int>(h.dim[0], 3); ++i) {
    const float p = std::abs(h.pixdim[static_cast<std::size_t>(i)]);
    if (!std::isfinite(p) || p <= 0.0f)
      throw ParseError("pixdim[" + std::to_string(i) + "]",
                       kOffPixdim + 4 * static_cast<std::size_t>(i),
                       "spacing must be finite and > 0");
    h.pixdim[static_cast<std::size_t>(i)] = p;
  }

  h.vox_offset = r.get<float>(kOffVoxOffset);
  if (!(h.vox_offset >= static_cast<float>(kDefaultVoxOffset)) ||
      h.vox_offset != std::floor(h.vox_offset))
    throw ParseError("vox_offset", kOffVoxOffset,
                     "vox_offset must be an integer >= 352");
  h.scl_slope = r.get<float>(kOffSclSlope);
  h.scl_inter = r.get<float>(kOffSclInter);

  const auto data_start = static_cast<std::size_t>(h.vox_offset);
  const std::size_t width = static_cast<std::size_t>(bytes_per_voxel(h.datatype));
  const std::size_t data_bytes = count * width;
  if (bytes.size() < data_start)
    throw ParseError("vox_offset", kOffVoxOffset,
                     "file ends at byte " + std::to_string(bytes.size()) +
                         " before data offset " + std::to_string(data_start));
  if (bytes.size() - data_start < data_bytes)
    throw ParseError("data", data_start,
                     "truncated data section: dims declare " +
                         std::to_string(data_bytes) + " bytes, found " +
                         std::to_string(bytes.size() - data_start));
  if (bytes.size() - data_start > data_bytes)
    throw ParseError("dim", kOffDim,
                     "dim/file-size mismatch: dims declare " +
                         std::to_string(data_bytes) + " data bytes, file has " +
                         std::to_string(bytes.size() - data_start));

  Image out{h, Image3D<float>(h.nx(), h.ny(), h.nz(), h.spacing())};
  const bool scaled = h.scl_slope != 0.0f && std::isfinite(h.scl_slope) &&
                      std::isfinite(h.scl_inter);
  auto values = out.voxels.values();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = data_start + i * width;
    double raw_value = 0.0;
    switch (h.datatype) {
    case DataType::UInt8:
      raw_value = bytes[at];
      break;
    case DataType::Int16:
      raw_value = r.get<std::int16_t>(at);
      break;
    case DataType::Float32:
      raw_value = r.get<float>(at);
      break;
    }
    const double v = scaled ? raw_value * h.scl_slope + h.scl_inter : raw_value;
    if (!std::isfinite(v))
      throw ParseError("data", at, "non-finite voxel value");
    values[i] = static_cast<float>(v);
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path &path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

Image read(const std::filesystem::path &path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse(bytes);
  } catch (const ParseError &e) {
    throw ParseError(e.field(), e.offset(), e.detail(), path.string());
  }
}

Volume read_volume(const std::filesystem::path &path, SequenceKind sequence,
                   std::string patient_id) {
  return {read(path).voxels, sequence, std::move(patient_id)};
}

LabelMap read_label_map(const std::filesystem::path &path,
                        const std::optional<LabelRemap> &remap) {
  const Image img = read(path);
  const auto &vox = img.voxels;
  LabelMap out(vox.nx(), vox.ny(), vox.nz(), vox.spacing());
  const auto src = vox.values();
  auto dst = out.values();
  const auto byte_at = [&](std::size_t i) {
    return static_cast<std::size_t>(img.header.vox_offset) +
           i * static_cast<std::size_t>(bytes_per_voxel(img.header.datatype));
  };
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float v = src[i];
    if (v != std::floor(v))
      throw ParseError("data", byte_at(i),
                       "non-integral label value in '" + path.string() + "'");
    const int code = static_cast<int>(v);
    int mapped = code;
    if (remap) {
      const auto it = remap->find(code);
      if (it != remap->end())
        mapped = it->second;
      else if (code != 0)
        throw ParseError("data", byte_at(i),
                         "label value " + std::to_string(code) +
                             " has no remap entry in '" + path.string() + "'");
    }
    if (mapped < 0 || mapped > kMaxLabel)
      throw ParseError("data", byte_at(i),
                       "label value " + std::to_string(code) +
                           " outside {0,1,2,3} in '" + path.string() + "'");
    dst[i] = static_cast<std::uint8_t>(mapped);
  }
  return out;
}

LabelRemap load_label_remap(const std::filesystem::path &json_path) {
  const auto bytes = read_file_bytes(json_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidArgument("label remap '" + json_path.string() +
                          "': " + e.what());
  }
  if (!j.is_object())
    throw InvalidArgument("label remap '" + json_path.string() +
                          "' must be a JSON object");
  LabelRemap remap;
  for (const auto &[key, value] : j.items()) {
    int external = 0;
    try {
      std::size_t used = 0;
      external = std::stoi(key, &used);
      if (used != key.size())
        throw std::invalid_argument(key);
    } catch (const std::exception &) {
      throw InvalidArgument("label remap key '" + key + "' is not an integer");
    }
    if (!value.is_number_integer() || value.get<int>() < 0 ||
        value.get<int>() > kMaxLabel)
      throw InvalidArgument("label remap entry '" + key +
                            "' must map to an integer in {0,1,2,3}");
    remap[external] = static_cast<std::uint8_t>(value.get<int>());
  }
  return remap;
}

std::vector<std::uint8_t> encode(const Image3D<float> &voxels) {
  auto out = blank_header(dims_for(voxels.nx(), voxels.ny(), voxels.nz()),
                          DataType::Float32, voxels.spacing());
  const auto v = voxels.values();
  out.resize(kDefaultVoxOffset + v.size() * sizeof(float));
  LittleEndianWriter w(out);
  for (std::size_t i = 0; i < v.size(); ++i)
    w.put<float>(kDefaultVoxOffset + 4 * i, v[i]);
  return out;
}

std::vector<std::uint8_t> encode(const LabelMap &labels) {
  auto out = blank_header(dims_for(labels.nx(), labels.ny(), labels.nz()),
                          DataType::UInt8, labels.spacing());
  const auto v = labels.values();
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

namespace {
void write_encoded(std::vector<std::uint8_t> bytes,
                   const std::filesystem::path &path) {
  if (ends_with_gz(path))
    bytes = gzip(bytes);
  write_file_bytes(path, bytes);
}
} // namespace

void write_image(const Image3D<float> &img, const std::filesystem::path &path) {
  write_encoded(encode(img), path);
}

void write_volume(const Volume &v, const std::filesystem::path &path) {
  write_image(v.image, path);
}

void write_label_map(const LabelMap &labels,
                     const std::filesystem::path &path) {
  write_encoded(encode(labels), path);
}

} // namespace cmr::nifti
