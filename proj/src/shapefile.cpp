#include "campseg/shapefile.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>

#include "campseg/error.hpp"

namespace campseg {

namespace {

constexpr std::int32_t kFileCode = 9994;
constexpr std::int32_t kVersion = 1000;
constexpr std::int32_t kPolygon = 5;
// YY-MM-DD with YY counted from 1900; fixed so reruns are byte-identical.
constexpr unsigned char kDbfDate[3] = {100, 1, 1};

struct Bytes {
  std::string buf;

  void be32(std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int s = 24; s >= 0; s -= 8) buf.push_back(static_cast<char>((u >> s) & 0xFF));
  }
  void le32(std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((u >> s) & 0xFF));
  }
  void le16(std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>(v >> 8));
  }
  void le64f(double d) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    for (int s = 0; s < 64; s += 8) buf.push_back(static_cast<char>((u >> s) & 0xFF));
  }
  void raw(const std::string& s) { buf += s; }
  void fill(std::size_t n, char c = 0) { buf.append(n, c); }
};

struct Box {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;

  void add(const Point& p) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  void add(const Box& b) {
    xmin = std::min(xmin, b.xmin);
    ymin = std::min(ymin, b.ymin);
    xmax = std::max(xmax, b.xmax);
    ymax = std::max(ymax, b.ymax);
  }
  bool empty() const { return xmin > xmax; }
};

void header(Bytes& b, std::int32_t length_words, const Box& box) {
  b.be32(kFileCode);
  for (int i = 0; i < 5; ++i) b.be32(0);
  b.be32(length_words);
  b.le32(kVersion);
  b.le32(kPolygon);
  const bool e = box.empty();
  for (double v : {e ? 0.0 : box.xmin, e ? 0.0 : box.ymin, e ? 0.0 : box.xmax, e ? 0.0 : box.ymax}) b.le64f(v);
  for (int i = 0; i < 4; ++i) b.le64f(0.0);
}

std::string polygon_content(const PolygonFeature& f, Box& box) {
  std::vector<const Ring*> parts{&f.outer};
  for (const auto& h : f.holes) parts.push_back(&h);
  std::int32_t points = 0;
  for (const Ring* r : parts) {
    for (const auto& p : *r) box.add(p);
    points += static_cast<std::int32_t>(r->size());
  }
  Bytes c;
  c.le32(kPolygon);
  for (double v : {box.xmin, box.ymin, box.xmax, box.ymax}) c.le64f(v);
  c.le32(static_cast<std::int32_t>(parts.size()));
  c.le32(points);
  std::int32_t start = 0;
  for (const Ring* r : parts) {
    c.le32(start);
    start += static_cast<std::int32_t>(r->size());
  }
  for (const Ring* r : parts)
    for (const auto& p : *r) {
      c.le64f(p.x);
      c.le64f(p.y);
    }
  return c.buf;
}

std::string numeric(double v, int width, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*.*f", width, decimals, v);
  std::string s = buf;
  if (static_cast<int>(s.size()) > width) fail(ErrorCode::IoFailure, "attribute value too wide for its DBF field");
  return s;
}

std::string dbf_bytes(const std::vector<PolygonFeature>& features) {
  struct Field {
    const char* name;
    unsigned char width, decimals;
  };
  constexpr Field fields[] = {{"id", 10, 0}, {"area", 19, 6}, {"px_count", 10, 0}};
  std::uint16_t record_len = 1;
  for (const auto& f : fields) record_len += f.width;

  Bytes b;
  b.buf.push_back(0x03);
  for (unsigned char d : kDbfDate) b.buf.push_back(static_cast<char>(d));
  b.le32(static_cast<std::int32_t>(features.size()));
  b.le16(static_cast<std::uint16_t>(32 + 32 * std::size(fields) + 1));
  b.le16(record_len);
  b.fill(20);
  for (const auto& f : fields) {
    std::string name = f.name;
    name.resize(11, '\0');
    b.raw(name);
    b.buf.push_back('N');
    b.fill(4);
    b.buf.push_back(static_cast<char>(f.width));
    b.buf.push_back(static_cast<char>(f.decimals));
    b.fill(14);
  }
  b.buf.push_back(0x0D);
  for (const auto& f : features) {
    b.buf.push_back(' ');
    b.raw(numeric(static_cast<double>(f.id), 10, 0));
    b.raw(numeric(f.area, 19, 6));
    b.raw(numeric(static_cast<double>(f.pixel_count), 10, 0));
  }
  b.buf.push_back(0x1A);
  return b.buf;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::filesystem::path with_ext(const std::filesystem::path& base, const char* ext) {
  auto p = base;
  p += ext;
  return p;
}

}  // namespace

void write_shapefile(const std::vector<PolygonFeature>& features, const std::optional<std::string>& crs_text,
                     const std::filesystem::path& base) {
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());

  Box total;
  std::vector<std::string> contents;
  contents.reserve(features.size());
  for (const auto& f : features) {
    if (f.outer.size() < 4) fail(ErrorCode::DegenerateRing, "feature " + std::to_string(f.id) + " has no outer ring");
    Box box;
    contents.push_back(polygon_content(f, box));
    total.add(box);
  }

  std::int32_t shp_words = 50;
  for (const auto& c : contents) shp_words += 4 + static_cast<std::int32_t>(c.size() / 2);

  Bytes shp, shx;
  header(shp, shp_words, total);
  header(shx, 50 + 4 * static_cast<std::int32_t>(contents.size()), total);
  for (std::size_t i = 0; i < contents.size(); ++i) {
    const auto words = static_cast<std::int32_t>(contents[i].size() / 2);
    shx.be32(static_cast<std::int32_t>(shp.buf.size() / 2));
    shx.be32(words);
    shp.be32(static_cast<std::int32_t>(i + 1));
    shp.be32(words);
    shp.raw(contents[i]);
  }

  write_file(with_ext(base, ".shp"), shp.buf);
  write_file(with_ext(base, ".shx"), shx.buf);
  write_file(with_ext(base, ".dbf"), dbf_bytes(features));
  const auto prj = with_ext(base, ".prj");
  if (crs_text)
    write_file(prj, *crs_text);
  else
    std::filesystem::remove(prj);
}

}  // namespace campseg
