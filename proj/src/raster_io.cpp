#include "campseg/raster_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "campseg/error.hpp"

namespace campseg {
namespace {

namespace fs = std::filesystem;

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kPredictor = 317,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kTileByteCounts = 325,
  kExtraSamples = 338,
  kSampleFormat = 339,
  kModelPixelScale = 33550,
  kModelTiepoint = 33922,
  kModelTransformation = 34264,
  kGeoKeyDirectory = 34735,
  kGeoAsciiParams = 34737,
};

enum FieldType : std::uint16_t {
  kByte = 1,
  kAscii = 2,
  kShort = 3,
  kLong = 4,
  kRational = 5,
  kSByte = 6,
  kUndefined = 7,
  kSShort = 8,
  kSLong = 9,
  kSRational = 10,
  kFloat = 11,
  kDouble = 12,
};

constexpr std::uint16_t kGeoKeyModelType = 1024;
constexpr std::uint16_t kGeoKeyRasterType = 1025;
constexpr std::uint16_t kGeoKeyCitation = 1026;

std::size_t field_size(std::uint16_t type) {
  switch (type) {
    case kByte: case kAscii: case kSByte: case kUndefined: return 1;
    case kShort: case kSShort: return 2;
    case kLong: case kSLong: case kFloat: return 4;
    case kRational: case kSRational: case kDouble: return 8;
    default: return 0;
  }
}

template <typename T>
T byteswap_value(T v) {
  auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

bool host_is(ByteOrder order) {
  return (order == ByteOrder::Little) == (std::endian::native == std::endian::little);
}

// ---------------------------------------------------------------- reading

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& data, ByteOrder order) : data_(data), order_(order) {}

  template <typename T>
  T get(std::uint64_t offset) const {
    if (offset + sizeof(T) > data_.size()) fail(ErrorCode::MalformedFile, "read past end of file");
    T v;
    std::memcpy(&v, data_.data() + offset, sizeof(T));
    return host_is(order_) ? v : byteswap_value(v);
  }

  std::size_t size() const { return data_.size(); }
  const std::uint8_t* at(std::uint64_t offset, std::uint64_t count) const {
    if (offset > data_.size() || count > data_.size() - offset)
      fail(ErrorCode::MalformedFile, "data block extends past end of file");
    return data_.data() + offset;
  }
  ByteOrder order() const { return order_; }

 private:
  const std::vector<std::uint8_t>& data_;
  ByteOrder order_;
};

struct Field {
  std::uint16_t type = 0;
  std::vector<double> numbers;
  std::string text;

  std::uint64_t uint(std::size_t i = 0) const {
    if (i >= numbers.size()) fail(ErrorCode::MalformedFile, "tag has too few values");
    return static_cast<std::uint64_t>(numbers[i]);
  }
};

using Directory = std::map<std::uint16_t, Field>;

Directory read_directory(const ByteReader& in, std::uint64_t ifd_offset) {
  Directory dir;
  const auto count = in.get<std::uint16_t>(ifd_offset);
  if (count == 0) fail(ErrorCode::MalformedFile, "empty IFD");
  in.at(ifd_offset + 2, static_cast<std::uint64_t>(count) * 12);
  for (std::uint16_t e = 0; e < count; ++e) {
    const std::uint64_t entry = ifd_offset + 2 + 12ull * e;
    const auto tag = in.get<std::uint16_t>(entry);
    const auto type = in.get<std::uint16_t>(entry + 2);
    const auto n = in.get<std::uint32_t>(entry + 4);
    const std::size_t size = field_size(type);
    if (size == 0) continue;  // unknown field types are skipped per TIFF 6.0
    const std::uint64_t total = size * static_cast<std::uint64_t>(n);
    const std::uint64_t value_offset = total <= 4 ? entry + 8 : in.get<std::uint32_t>(entry + 8);
    in.at(value_offset, total);

    Field f;
    f.type = type;
    if (type == kAscii) {
      const auto* p = in.at(value_offset, total);
      f.text.assign(reinterpret_cast<const char*>(p), n);
      while (!f.text.empty() && f.text.back() == '\0') f.text.pop_back();
    } else {
      f.numbers.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint64_t o = value_offset + i * size;
        switch (type) {
          case kByte: case kUndefined: f.numbers.push_back(in.get<std::uint8_t>(o)); break;
          case kSByte: f.numbers.push_back(in.get<std::int8_t>(o)); break;
          case kShort: f.numbers.push_back(in.get<std::uint16_t>(o)); break;
          case kSShort: f.numbers.push_back(in.get<std::int16_t>(o)); break;
          case kLong: f.numbers.push_back(in.get<std::uint32_t>(o)); break;
          case kSLong: f.numbers.push_back(in.get<std::int32_t>(o)); break;
          case kFloat: f.numbers.push_back(in.get<float>(o)); break;
          case kDouble: f.numbers.push_back(in.get<double>(o)); break;
          case kRational: {
            const double den = in.get<std::uint32_t>(o + 4);
            f.numbers.push_back(den == 0 ? 0.0 : in.get<std::uint32_t>(o) / den);
            break;
          }
          case kSRational: {
            const double den = in.get<std::int32_t>(o + 4);
            f.numbers.push_back(den == 0 ? 0.0 : in.get<std::int32_t>(o) / den);
            break;
          }
        }
      }
    }
    dir[tag] = std::move(f);
  }
  return dir;
}

const Field& require(const Directory& dir, std::uint16_t tag, const char* name) {
  auto it = dir.find(tag);
  if (it == dir.end()) fail(ErrorCode::MalformedFile, std::string("missing required tag ") + name);
  return it->second;
}

std::uint64_t uint_or(const Directory& dir, std::uint16_t tag, std::uint64_t fallback) {
  auto it = dir.find(tag);
  return it == dir.end() || it->second.numbers.empty() ? fallback : it->second.uint();
}

std::vector<std::uint8_t> inflate_chunk(const std::uint8_t* src, std::size_t src_len, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) fail(ErrorCode::MalformedFile, "zlib init failed");
  zs.next_in = const_cast<Bytef*>(src);
  zs.avail_in = static_cast<uInt>(src_len);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(expected);
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = expected - zs.avail_out;
  inflateEnd(&zs);
  if ((rc != Z_STREAM_END && rc != Z_BUF_ERROR && rc != Z_OK) || produced < expected)
    fail(ErrorCode::MalformedFile, "deflate chunk decodes to fewer bytes than declared");
  return out;
}

std::optional<GeoTransform> geo_from_tags(const Directory& dir) {
  std::optional<GeoTransform> gt;
  if (auto t = dir.find(kModelTransformation); t != dir.end()) {
    const auto& m = t->second.numbers;
    if (m.size() < 16) fail(ErrorCode::MalformedFile, "ModelTransformation needs 16 values");
    gt = GeoTransform{m[3], m[7], m[0], m[5], m[4], m[1], std::nullopt};
  } else {
    auto s = dir.find(kModelPixelScale);
    auto p = dir.find(kModelTiepoint);
    if (s != dir.end() && p != dir.end()) {
      const auto& scale = s->second.numbers;
      const auto& tie = p->second.numbers;
      if (scale.size() < 2 || tie.size() < 6) fail(ErrorCode::MalformedFile, "short georeferencing tags");
      GeoTransform g;
      g.pixel_width = scale[0];
      g.pixel_height = -scale[1];
      g.origin_x = tie[3] - tie[0] * g.pixel_width;
      g.origin_y = tie[4] - tie[1] * g.pixel_height;
      gt = g;
    }
  }
  if (!gt) return gt;

  auto keys = dir.find(kGeoKeyDirectory);
  auto ascii = dir.find(kGeoAsciiParams);
  if (keys != dir.end() && ascii != dir.end()) {
    const auto& k = keys->second.numbers;
    const std::size_t n = k.size() >= 4 ? static_cast<std::size_t>(k[3]) : 0;
    for (std::size_t i = 0; i < n && 4 + 4 * i + 3 < k.size(); ++i) {
      const auto id = static_cast<std::uint16_t>(k[4 + 4 * i]);
      const auto loc = static_cast<std::uint16_t>(k[4 + 4 * i + 1]);
      const auto cnt = static_cast<std::size_t>(k[4 + 4 * i + 2]);
      const auto off = static_cast<std::size_t>(k[4 + 4 * i + 3]);
      if (id == kGeoKeyCitation && loc == kGeoAsciiParams) {
        const std::string& s = ascii->second.text;
        if (off < s.size()) {
          std::string c = s.substr(off, cnt);
          if (!c.empty() && c.back() == '|') c.pop_back();
          if (!c.empty()) gt->crs_text = c;
        }
      }
    }
  }
  return gt;
}

template <typename T>
void swap_samples(std::vector<T>& v) {
  for (auto& x : v) x = byteswap_value(x);
}

GeoRaster read_impl(const fs::path& path, const GeoTransform* fallback) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (data.size() < 8) fail(ErrorCode::MalformedFile, "file too short for a TIFF header");

  ByteOrder order;
  if (data[0] == 'I' && data[1] == 'I')
    order = ByteOrder::Little;
  else if (data[0] == 'M' && data[1] == 'M')
    order = ByteOrder::Big;
  else
    fail(ErrorCode::MalformedFile, "bad byte-order magic");
  ByteReader in(data, order);
  const auto version = in.get<std::uint16_t>(2);
  if (version == 43) fail(ErrorCode::UnsupportedFeature, "BigTIFF is not supported");
  if (version != 42) fail(ErrorCode::MalformedFile, "bad TIFF version number");
  const Directory dir = read_directory(in, in.get<std::uint32_t>(4));

  const auto width = require(dir, kImageWidth, "ImageWidth").uint();
  const auto height = require(dir, kImageLength, "ImageLength").uint();
  const auto spp = uint_or(dir, kSamplesPerPixel, 1);
  if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24))
    fail(ErrorCode::MalformedFile, "implausible image dimensions");
  if (spp < 1 || spp > 4) fail(ErrorCode::UnsupportedFeature, "only 1-4 samples per pixel are supported");

  const auto compression = uint_or(dir, kCompression, 1);
  if (compression != 1 && compression != 8 && compression != 32946)
    fail(ErrorCode::UnsupportedFeature, "compression " + std::to_string(compression) + " is not supported");
  if (uint_or(dir, kPredictor, 1) != 1) fail(ErrorCode::UnsupportedFeature, "predictors are not supported");
  if (spp > 1 && uint_or(dir, kPlanarConfig, 1) != 1)
    fail(ErrorCode::UnsupportedFeature, "only chunky planar configuration is supported");
  const auto photometric = uint_or(dir, kPhotometric, 1);
  if (photometric > 2) fail(ErrorCode::UnsupportedFeature, "photometric interpretation not supported");

  const Field& bps_field = require(dir, kBitsPerSample, "BitsPerSample");
  const auto bits = bps_field.uint();
  for (std::size_t i = 1; i < bps_field.numbers.size(); ++i)
    if (bps_field.uint(i) != bits) fail(ErrorCode::UnsupportedFeature, "mixed bits per sample");
  const auto format = uint_or(dir, kSampleFormat, 1);
  SampleType type;
  if (bits == 8 && format == 1)
    type = SampleType::UInt8;
  else if (bits == 16 && format == 1)
    type = SampleType::UInt16;
  else if (bits == 32 && format == 3)
    type = SampleType::Float32;
  else
    fail(ErrorCode::UnsupportedFeature, "sample layout " + std::to_string(bits) + " bits / format " +
                                            std::to_string(format) + " not supported");

  const std::size_t bytes_per_pixel = spp * bits / 8;
  const std::size_t row_bytes = width * bytes_per_pixel;
  std::vector<std::uint8_t> raw(row_bytes * height);

  auto chunk_bytes = [&](std::uint64_t offset, std::uint64_t count, std::size_t expected) {
    const std::uint8_t* src = in.at(offset, count);
    if (compression == 1) {
      if (count < expected) fail(ErrorCode::MalformedFile, "strip or tile shorter than declared size");
      return std::vector<std::uint8_t>(src, src + expected);
    }
    return inflate_chunk(src, count, expected);
  };

  const bool tiled = dir.contains(kTileWidth);
  if (!tiled) {
    const auto rows_per_strip = std::min<std::uint64_t>(uint_or(dir, kRowsPerStrip, height), height);
    if (rows_per_strip == 0) fail(ErrorCode::MalformedFile, "RowsPerStrip is zero");
    const Field& offsets = require(dir, kStripOffsets, "StripOffsets");
    const Field& counts = require(dir, kStripByteCounts, "StripByteCounts");
    const std::size_t strips = (height + rows_per_strip - 1) / rows_per_strip;
    if (offsets.numbers.size() < strips || counts.numbers.size() < strips)
      fail(ErrorCode::MalformedFile, "strip tables shorter than strip count");
    for (std::size_t s = 0; s < strips; ++s) {
      const std::size_t rows = std::min<std::uint64_t>(rows_per_strip, height - s * rows_per_strip);
      auto chunk = chunk_bytes(offsets.uint(s), counts.uint(s), rows * row_bytes);
      std::memcpy(raw.data() + s * rows_per_strip * row_bytes, chunk.data(), rows * row_bytes);
    }
  } else {
    const auto tw = require(dir, kTileWidth, "TileWidth").uint();
    const auto th = require(dir, kTileLength, "TileLength").uint();
    if (tw == 0 || th == 0) fail(ErrorCode::MalformedFile, "zero tile size");
    const Field& offsets = require(dir, kTileOffsets, "TileOffsets");
    const Field& counts = require(dir, kTileByteCounts, "TileByteCounts");
    const std::size_t across = (width + tw - 1) / tw;
    const std::size_t down = (height + th - 1) / th;
    if (offsets.numbers.size() < across * down || counts.numbers.size() < across * down)
      fail(ErrorCode::MalformedFile, "tile tables shorter than tile count");
    const std::size_t tile_row_bytes = tw * bytes_per_pixel;
    for (std::size_t ty = 0; ty < down; ++ty) {
      for (std::size_t tx = 0; tx < across; ++tx) {
        const std::size_t t = ty * across + tx;
        auto chunk = chunk_bytes(offsets.uint(t), counts.uint(t), tile_row_bytes * th);
        const std::size_t cols = std::min<std::uint64_t>(tw, width - tx * tw);
        const std::size_t rows = std::min<std::uint64_t>(th, height - ty * th);
        for (std::size_t r = 0; r < rows; ++r)
          std::memcpy(raw.data() + (ty * th + r) * row_bytes + tx * tile_row_bytes, chunk.data() + r * tile_row_bytes,
                      cols * bytes_per_pixel);
      }
    }
  }

  RasterGrid grid(static_cast<int>(width), static_cast<int>(height), static_cast<int>(spp), type);
  std::visit(
      [&](auto& v) {
        std::memcpy(v.data(), raw.data(), raw.size());
        if (!host_is(order) && sizeof(v[0]) > 1) swap_samples(v);
      },
      grid.storage());

  std::optional<GeoTransform> gt = geo_from_tags(dir);
  if (!gt) {
    if (auto wf = find_world_file(path)) gt = read_world_file(*wf);
  }
  if (!gt) {
    if (!fallback) fail(ErrorCode::MissingGeoreference, path.string() + " has no georeferencing");
    gt = *fallback;
  }
  return {std::move(grid), *gt};
}

// ---------------------------------------------------------------- writing

class ByteWriter {
 public:
  explicit ByteWriter(ByteOrder order) : order_(order) {}

  template <typename T>
  void put(T v) {
    if (!host_is(order_)) v = byteswap_value(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void align2() {
    if (buf_.size() % 2) buf_.push_back(0);
  }
  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t>& buffer() { return buf_; }
  template <typename T>
  void patch(std::size_t at, T v) {
    if (!host_is(order_)) v = byteswap_value(v);
    std::memcpy(buf_.data() + at, &v, sizeof(T));
  }

 private:
  ByteOrder order_;
  std::vector<std::uint8_t> buf_;
};

struct OutField {
  std::uint16_t tag;
  std::uint16_t type;
  std::vector<double> numbers;  // for numeric types
  std::string text;             // for ASCII

  std::uint32_t count() const {
    return static_cast<std::uint32_t>(type == kAscii ? text.size() + 1 : numbers.size());
  }
};

void put_value(ByteWriter& w, std::uint16_t type, double v) {
  switch (type) {
    case kShort: w.put<std::uint16_t>(static_cast<std::uint16_t>(v)); break;
    case kLong: w.put<std::uint32_t>(static_cast<std::uint32_t>(v)); break;
    case kDouble: w.put<double>(v); break;
    default: fail(ErrorCode::IoFailure, "unexpected field type in writer");
  }
}

std::vector<std::uint8_t> deflate_chunk(const std::vector<std::uint8_t>& src) {
  uLongf len = compressBound(static_cast<uLong>(src.size()));
  std::vector<std::uint8_t> out(len);
  if (compress2(out.data(), &len, src.data(), static_cast<uLong>(src.size()), 6) != Z_OK)
    fail(ErrorCode::IoFailure, "deflate failed");
  out.resize(len);
  return out;
}

std::vector<std::uint8_t> sample_bytes(const RasterGrid& grid, ByteOrder order) {
  std::vector<std::uint8_t> raw(grid.bytes().size());
  std::memcpy(raw.data(), grid.bytes().data(), raw.size());
  const std::size_t s = sample_size(grid.sample_type());
  if (!host_is(order) && s > 1)
    for (std::size_t i = 0; i < raw.size(); i += s) std::reverse(raw.begin() + i, raw.begin() + i + s);
  return raw;
}

}  // namespace

GeoRaster read_geotiff(const fs::path& path) { return read_impl(path, nullptr); }

GeoRaster read_geotiff(const fs::path& path, const GeoTransform& fallback) { return read_impl(path, &fallback); }

void write_geotiff(const RasterGrid& grid, const GeoTransform& gt, const fs::path& path,
                   const TiffWriteOptions& options) {
  grid.validate();
  gt.validate();
  if (options.tile_size < 0 || options.tile_size % 16 != 0)
    fail(ErrorCode::UnsupportedFeature, "tile size must be a multiple of 16");

  const int width = grid.width();
  const int height = grid.height();
  const int bands = grid.bands();
  const std::size_t bps = sample_size(grid.sample_type());
  const std::size_t row_bytes = static_cast<std::size_t>(width) * bands * bps;
  const std::vector<std::uint8_t> raw = sample_bytes(grid, options.byte_order);

  // Chunk the image into strips or tiles.
  std::vector<std::vector<std::uint8_t>> chunks;
  int rows_per_strip = 0;
  if (options.tile_size == 0) {
    rows_per_strip = options.rows_per_strip > 0
                         ? options.rows_per_strip
                         : std::max<int>(1, static_cast<int>((64 * 1024) / std::max<std::size_t>(row_bytes, 1)));
    rows_per_strip = std::min(rows_per_strip, height);
    for (int r = 0; r < height; r += rows_per_strip) {
      const int rows = std::min(rows_per_strip, height - r);
      chunks.emplace_back(raw.begin() + r * row_bytes, raw.begin() + (r + rows) * row_bytes);
    }
  } else {
    const int ts = options.tile_size;
    const std::size_t tile_row = static_cast<std::size_t>(ts) * bands * bps;
    for (int ty = 0; ty < height; ty += ts) {
      for (int tx = 0; tx < width; tx += ts) {
        std::vector<std::uint8_t> tile(tile_row * ts, 0);
        const int rows = std::min(ts, height - ty);
        const std::size_t cols_bytes = static_cast<std::size_t>(std::min(ts, width - tx)) * bands * bps;
        for (int r = 0; r < rows; ++r)
          std::memcpy(tile.data() + r * tile_row, raw.data() + (ty + r) * row_bytes + tx * bands * bps, cols_bytes);
        chunks.push_back(std::move(tile));
      }
    }
  }
  if (options.compression == TiffCompression::Deflate)
    for (auto& c : chunks) c = deflate_chunk(c);

  ByteWriter w(options.byte_order);
  w.put<std::uint8_t>(options.byte_order == ByteOrder::Little ? 'I' : 'M');
  w.put<std::uint8_t>(options.byte_order == ByteOrder::Little ? 'I' : 'M');
  w.put<std::uint16_t>(42);
  w.put<std::uint32_t>(0);  // IFD offset, patched below

  std::vector<double> offsets, counts;
  for (const auto& c : chunks) {
    w.align2();
    offsets.push_back(static_cast<double>(w.size()));
    counts.push_back(static_cast<double>(c.size()));
    w.put_bytes(c.data(), c.size());
  }

  const double bits = static_cast<double>(bps * 8);
  const double fmt = grid.sample_type() == SampleType::Float32 ? 3 : 1;
  std::vector<OutField> fields;
  fields.push_back({kImageWidth, kLong, {double(width)}, {}});
  fields.push_back({kImageLength, kLong, {double(height)}, {}});
  fields.push_back({kBitsPerSample, kShort, std::vector<double>(bands, bits), {}});
  fields.push_back({kCompression, kShort, {options.compression == TiffCompression::Deflate ? 8.0 : 1.0}, {}});
  fields.push_back({kPhotometric, kShort, {bands >= 3 ? 2.0 : 1.0}, {}});
  if (options.tile_size == 0) fields.push_back({kStripOffsets, kLong, offsets, {}});
  fields.push_back({kSamplesPerPixel, kShort, {double(bands)}, {}});
  if (options.tile_size == 0) {
    fields.push_back({kRowsPerStrip, kLong, {double(rows_per_strip)}, {}});
    fields.push_back({kStripByteCounts, kLong, counts, {}});
  }
  fields.push_back({kPlanarConfig, kShort, {1.0}, {}});
  if (options.tile_size != 0) {
    fields.push_back({kTileWidth, kLong, {double(options.tile_size)}, {}});
    fields.push_back({kTileLength, kLong, {double(options.tile_size)}, {}});
    fields.push_back({kTileOffsets, kLong, offsets, {}});
    fields.push_back({kTileByteCounts, kLong, counts, {}});
  }
  if (bands == 2 || bands == 4) fields.push_back({kExtraSamples, kShort, {0.0}, {}});
  fields.push_back({kSampleFormat, kShort, std::vector<double>(bands, fmt), {}});
  if (!gt.has_rotation()) {
    fields.push_back({kModelPixelScale, kDouble, {gt.pixel_width, -gt.pixel_height, 0.0}, {}});
    fields.push_back({kModelTiepoint, kDouble, {0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0}, {}});
  } else {
    fields.push_back({kModelTransformation,
                      kDouble,
                      {gt.pixel_width, gt.col_rotation, 0, gt.origin_x, gt.row_rotation, gt.pixel_height, 0,
                       gt.origin_y, 0, 0, 0, 0, 0, 0, 0, 1},
                      {}});
  }
  std::vector<double> keys{1, 1, 0, 0};
  auto add_key = [&](double id, double loc, double count, double value) {
    for (double v : {id, loc, count, value}) keys.push_back(v);
    keys[3] += 1;
  };
  add_key(kGeoKeyModelType, 0, 1, 32767);  // user-defined model
  add_key(kGeoKeyRasterType, 0, 1, 1);     // PixelIsArea
  std::string citation;
  if (gt.crs_text) {
    citation = *gt.crs_text + "|";
    add_key(kGeoKeyCitation, kGeoAsciiParams, double(citation.size()), 0);
  }
  fields.push_back({kGeoKeyDirectory, kShort, keys, {}});
  if (gt.crs_text) fields.push_back({kGeoAsciiParams, kAscii, {}, citation});
  std::sort(fields.begin(), fields.end(), [](const OutField& a, const OutField& b) { return a.tag < b.tag; });

  // Out-of-line values first, then the IFD itself.
  std::vector<std::uint32_t> value_offsets(fields.size(), 0);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    if (field_size(f.type) * f.count() <= 4) continue;
    w.align2();
    value_offsets[i] = static_cast<std::uint32_t>(w.size());
    if (f.type == kAscii) {
      w.put_bytes(reinterpret_cast<const std::uint8_t*>(f.text.c_str()), f.text.size() + 1);
    } else {
      for (double v : f.numbers) put_value(w, f.type, v);
    }
  }
  w.align2();
  const auto ifd_offset = static_cast<std::uint32_t>(w.size());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    w.put<std::uint16_t>(f.tag);
    w.put<std::uint16_t>(f.type);
    w.put<std::uint32_t>(f.count());
    if (field_size(f.type) * f.count() > 4) {
      w.put<std::uint32_t>(value_offsets[i]);
    } else {
      const std::size_t start = w.size();
      if (f.type == kAscii)
        w.put_bytes(reinterpret_cast<const std::uint8_t*>(f.text.c_str()), f.text.size() + 1);
      else
        for (double v : f.numbers) put_value(w, f.type, v);
      while (w.size() < start + 4) w.put<std::uint8_t>(0);
    }
  }
  w.put<std::uint32_t>(0);
  w.patch<std::uint32_t>(4, ifd_offset);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

GeoTransform read_world_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x;
    std::string rest;
    if (!(ls >> x) || (ls >> rest)) fail(ErrorCode::MalformedFile, "non-numeric world file line: " + line);
    v.push_back(x);
  }
  if (v.size() != 6) fail(ErrorCode::MalformedFile, "world file must have exactly six lines");
  GeoTransform gt;
  gt.pixel_width = v[0];
  gt.row_rotation = v[1];
  gt.col_rotation = v[2];
  gt.pixel_height = v[3];
  // Shift from the centre of the upper-left pixel to its outer corner.
  gt.origin_x = v[4] - 0.5 * v[0] - 0.5 * v[2];
  gt.origin_y = v[5] - 0.5 * v[1] - 0.5 * v[3];
  gt.validate();
  return gt;
}

void write_world_file(const GeoTransform& gt, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot create " + path.string());
  auto [cx, cy] = gt.world(0.5, 0.5);
  out << std::setprecision(17) << gt.pixel_width << '\n'
      << gt.row_rotation << '\n'
      << gt.col_rotation << '\n'
      << gt.pixel_height << '\n'
      << cx << '\n'
      << cy << '\n';
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::optional<fs::path> find_world_file(const fs::path& raster_path) {
  for (const char* ext : {".tfw", ".tifw", ".wld", ".TFW", ".TIFW", ".WLD"}) {
    fs::path candidate = raster_path;
    candidate.replace_extension(ext);
    if (fs::exists(candidate)) return candidate;
  }
  return std::nullopt;
}

}  // namespace campseg
