#pragma once

// Minimal reader for the polygon shapefiles the library writes; test use only.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "campseg/vectorize.hpp"

namespace campseg::testing {

struct ShpHeader {
  std::int32_t file_code = 0;
  std::int32_t length_words = 0;
  std::int32_t version = 0;
  std::int32_t shape_type = 0;
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
};

struct ShpRecord {
  std::int32_t number = 0;
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  std::vector<Ring> parts;
};

struct DbfField {
  std::string name;
  char type = 0;
  int width = 0;
  int decimals = 0;
};

struct ShapefileContents {
  ShpHeader shp;
  ShpHeader shx;
  std::vector<ShpRecord> records;
  std::vector<std::pair<std::int32_t, std::int32_t>> index;  // offset, length in words
  std::vector<DbfField> fields;
  std::vector<std::vector<std::string>> rows;  // trimmed cell text
  std::string dbf_date;                        // three raw bytes
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

inline std::int32_t be32(const std::string& b, std::size_t o) {
  const auto* u = reinterpret_cast<const unsigned char*>(b.data() + o);
  return static_cast<std::int32_t>((std::uint32_t(u[0]) << 24) | (std::uint32_t(u[1]) << 16) |
                                   (std::uint32_t(u[2]) << 8) | std::uint32_t(u[3]));
}

inline std::int32_t le32(const std::string& b, std::size_t o) {
  const auto* u = reinterpret_cast<const unsigned char*>(b.data() + o);
  return static_cast<std::int32_t>((std::uint32_t(u[3]) << 24) | (std::uint32_t(u[2]) << 16) |
                                   (std::uint32_t(u[1]) << 8) | std::uint32_t(u[0]));
}

inline double le64f(const std::string& b, std::size_t o) {
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | static_cast<unsigned char>(b[o + i]);
  return std::bit_cast<double>(u);
}

inline ShpHeader read_header(const std::string& b) {
  if (b.size() < 100) throw std::runtime_error("short shapefile header");
  return {be32(b, 0), be32(b, 24), le32(b, 28), le32(b, 32), le64f(b, 36), le64f(b, 44), le64f(b, 52), le64f(b, 60)};
}

inline std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(' '));
  s.erase(s.find_last_not_of(' ') + 1);
  return s;
}

inline ShapefileContents read_shapefile(const std::filesystem::path& base) {
  auto with = [&](const char* ext) {
    auto p = base;
    p += ext;
    return p;
  };
  ShapefileContents out;
  const std::string shp = slurp(with(".shp")), shx = slurp(with(".shx")), dbf = slurp(with(".dbf"));
  out.shp = read_header(shp);
  out.shx = read_header(shx);
  if (static_cast<std::size_t>(out.shp.length_words) * 2 != shp.size()) throw std::runtime_error("shp length field");
  if (static_cast<std::size_t>(out.shx.length_words) * 2 != shx.size()) throw std::runtime_error("shx length field");

  for (std::size_t o = 100; o < shx.size(); o += 8) out.index.emplace_back(be32(shx, o), be32(shx, o + 4));

  std::size_t o = 100;
  while (o < shp.size()) {
    ShpRecord r;
    r.number = be32(shp, o);
    const std::size_t len = static_cast<std::size_t>(be32(shp, o + 4)) * 2;
    const std::size_t c = o + 8;
    if (le32(shp, c) != 5) throw std::runtime_error("not a polygon record");
    r.xmin = le64f(shp, c + 4);
    r.ymin = le64f(shp, c + 12);
    r.xmax = le64f(shp, c + 20);
    r.ymax = le64f(shp, c + 28);
    const int nparts = le32(shp, c + 36), npoints = le32(shp, c + 40);
    std::vector<int> starts(nparts);
    for (int i = 0; i < nparts; ++i) starts[i] = le32(shp, c + 44 + 4 * i);
    const std::size_t pts = c + 44 + 4 * static_cast<std::size_t>(nparts);
    for (int i = 0; i < nparts; ++i) {
      const int end = i + 1 < nparts ? starts[i + 1] : npoints;
      Ring ring;
      for (int k = starts[i]; k < end; ++k) ring.push_back({le64f(shp, pts + 16 * k), le64f(shp, pts + 16 * k + 8)});
      r.parts.push_back(std::move(ring));
    }
    if (pts + 16 * static_cast<std::size_t>(npoints) != c + len) throw std::runtime_error("record length mismatch");
    out.records.push_back(std::move(r));
    o = c + len;
  }

  out.dbf_date = dbf.substr(1, 3);
  const std::int32_t nrec = le32(dbf, 4);
  const int header_len = static_cast<unsigned char>(dbf[8]) | (static_cast<unsigned char>(dbf[9]) << 8);
  const int record_len = static_cast<unsigned char>(dbf[10]) | (static_cast<unsigned char>(dbf[11]) << 8);
  for (std::size_t f = 32; dbf[f] != 0x0D; f += 32)
    out.fields.push_back({std::string(dbf.c_str() + f), dbf[f + 11], static_cast<unsigned char>(dbf[f + 16]),
                          static_cast<unsigned char>(dbf[f + 17])});
  for (std::int32_t i = 0; i < nrec; ++i) {
    std::size_t p = header_len + static_cast<std::size_t>(i) * record_len + 1;
    std::vector<std::string> row;
    for (const auto& f : out.fields) {
      row.push_back(trim(dbf.substr(p, f.width)));
      p += f.width;
    }
    out.rows.push_back(std::move(row));
  }
  if (static_cast<std::size_t>(header_len) + static_cast<std::size_t>(nrec) * record_len + 1 != dbf.size())
    throw std::runtime_error("dbf size mismatch");
  return out;
}

}  // namespace campseg::testing
