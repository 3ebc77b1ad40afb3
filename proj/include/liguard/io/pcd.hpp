#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"
#include "liguard/io/bytes.hpp"

namespace liguard::io {

enum class PcdMode { ascii, binary };

namespace pcd_detail {

struct FieldLayout {
  std::string name;
  std::size_t size = 4;
  char type = 'F';
  std::size_t count = 1;
  std::size_t offset = 0;  // byte offset within a binary record
  std::size_t column = 0;  // first token column in an ascii record
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::size_t to_size(std::string_view tok, const std::string& line) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("PCD header: bad number '" + std::string(tok) +
                     "' in line '" + line + "'");
  }
  return v;
}

/// Decodes one binary field value as double.
inline double decode_binary(const char* p, char type, std::size_t size) {
  switch (type) {
    case 'F':
      return size == 8 ? load_le<double>(p) : static_cast<double>(load_le<float>(p));
    case 'U':
      switch (size) {
        case 1: return static_cast<std::uint8_t>(*p);
        case 2: return load_le<std::uint16_t>(p);
        case 4: return load_le<std::uint32_t>(p);
        default: return static_cast<double>(load_le<std::uint64_t>(p));
      }
    default:
      switch (size) {
        case 1: return static_cast<std::int8_t>(*p);
        case 2: return load_le<std::int16_t>(p);
        case 4: return load_le<std::int32_t>(p);
        default: return static_cast<double>(load_le<std::int64_t>(p));
      }
  }
}

/// Scale that maps an integer-typed intensity onto [0,1].
inline double intensity_scale(char type, std::size_t size) {
  if (type == 'F') return 1.0;
  const int bits = static_cast<int>(size * 8) - (type == 'I' ? 1 : 0);
  return 1.0 / (std::ldexp(1.0, bits) - 1.0);
}

}  // namespace pcd_detail

/// Parses a PCD v0.7 file (DATA ascii or binary).
///
/// FIELDS must include x, y and z; intensity defaults to 0 when missing.
/// Integer-typed intensity is rescaled to [0,1]; float intensity is kept
/// as stored. HEIGHT > 1 marks the cloud as organized.
inline PointCloud read_pcd(std::string_view bytes) {
  using namespace pcd_detail;
  std::vector<FieldLayout> fields;
  std::vector<std::size_t> sizes, counts;
  std::vector<char> types;
  std::optional<std::size_t> width, height, points;
  std::optional<std::string> data_mode;

  std::size_t pos = 0;
  while (pos < bytes.size() && !data_mode) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    std::string_view raw = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    const std::string line(raw.size() && raw.back() == '\r' ? raw.substr(0, raw.size() - 1) : raw);
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string_view key = tok[0];
    auto need_values = [&](std::size_t n) {
      if (tok.size() - 1 != n) {
        throw ParseError("PCD header: expected " + std::to_string(n) +
                         " values in line '" + line + "'");
      }
    };
    if (key == "VERSION" || key == "VIEWPOINT") {
      continue;
    } else if (key == "FIELDS") {
      if (tok.size() < 2) throw ParseError("PCD header: empty FIELDS line '" + line + "'");
      fields.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) fields.push_back({std::string(tok[i])});
    } else if (key == "SIZE") {
      sizes.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) {
        std::size_t s = to_size(tok[i], line);
        if (s != 1 && s != 2 && s != 4 && s != 8) {
          throw ParseError("PCD header: unsupported SIZE in line '" + line + "'");
        }
        sizes.push_back(s);
      }
    } else if (key == "TYPE") {
      types.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i].size() != 1 || std::string_view("FIU").find(tok[i][0]) == std::string_view::npos) {
          throw ParseError("PCD header: unsupported TYPE in line '" + line + "'");
        }
        types.push_back(tok[i][0]);
      }
    } else if (key == "COUNT") {
      counts.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) counts.push_back(to_size(tok[i], line));
    } else if (key == "WIDTH") {
      need_values(1);
      width = to_size(tok[1], line);
    } else if (key == "HEIGHT") {
      need_values(1);
      height = to_size(tok[1], line);
    } else if (key == "POINTS") {
      need_values(1);
      points = to_size(tok[1], line);
    } else if (key == "DATA") {
      need_values(1);
      if (tok[1] != "ascii" && tok[1] != "binary") {
        throw ParseError("PCD header: unsupported data mode in line '" + line + "'");
      }
      data_mode = std::string(tok[1]);
    } else {
      throw ParseError("PCD header: unknown line '" + line + "'");
    }
  }

  if (!data_mode) throw ParseError("PCD header: missing DATA line");
  if (fields.empty()) throw ParseError("PCD header: missing FIELDS line");
  if (sizes.size() != fields.size()) throw ParseError("PCD header: SIZE does not match FIELDS");
  if (types.size() != fields.size()) throw ParseError("PCD header: TYPE does not match FIELDS");
  if (counts.empty()) counts.assign(fields.size(), 1);
  if (counts.size() != fields.size()) throw ParseError("PCD header: COUNT does not match FIELDS");
  if (!width) throw ParseError("PCD header: missing WIDTH line");
  if (!height) height = 1;
  if (!points) points = *width * *height;
  if (*width * *height != *points) {
    throw ParseError("PCD header: POINTS " + std::to_string(*points) +
                     " does not equal WIDTH*HEIGHT");
  }

  std::size_t offset = 0, column = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (types[i] == 'F' && sizes[i] != 4 && sizes[i] != 8) {
      throw ParseError("PCD header: float field '" + fields[i].name + "' must have SIZE 4 or 8");
    }
    fields[i].size = sizes[i];
    fields[i].type = types[i];
    fields[i].count = counts[i];
    fields[i].offset = offset;
    fields[i].column = column;
    offset += sizes[i] * counts[i];
    column += counts[i];
  }
  const std::size_t stride = offset;

  auto find = [&](std::string_view name) -> const FieldLayout* {
    for (const auto& f : fields) {
      if (f.name == name) return &f;
    }
    return nullptr;
  };
  const FieldLayout* fx = find("x");
  const FieldLayout* fy = find("y");
  const FieldLayout* fz = find("z");
  const FieldLayout* fi = find("intensity");
  if (!fx || !fy || !fz) throw ParseError("PCD header: FIELDS must include x y z");

  PointCloud pc;
  pc.points.resize(*points);
  if (*height > 1) {
    pc.organized = OrganizedDims{static_cast<std::uint32_t>(*width),
                                 static_cast<std::uint32_t>(*height)};
  }
  const std::string_view payload = pos <= bytes.size() ? bytes.substr(pos) : std::string_view{};

  if (*data_mode == "binary") {
    if (payload.size() != stride * *points) {
      throw ParseError("PCD payload: POINTS " + std::to_string(*points) +
                       " needs " + std::to_string(stride * *points) +
                       " bytes, found " + std::to_string(payload.size()));
    }
    auto coord = [&](const char* rec, const FieldLayout* f) -> double {
      return decode_binary(rec + f->offset, f->type, f->size);
    };
    const double iscale = fi ? intensity_scale(fi->type, fi->size) : 1.0;
    for (std::size_t k = 0; k < *points; ++k) {
      const char* rec = payload.data() + k * stride;
      auto& p = pc.points[k];
      p.x = coord(rec, fx);
      p.y = coord(rec, fy);
      p.z = coord(rec, fz);
      if (fi) {
        p.intensity = fi->type == 'F'
                          ? coord(rec, fi)
                          : decode_binary(rec + fi->offset, fi->type, fi->size) * iscale;
      }
    }
    return pc;
  }

  // ascii
  const double iscale = fi ? intensity_scale(fi->type, fi->size) : 1.0;
  std::size_t k = 0;
  std::size_t p = 0;
  while (p < payload.size()) {
    std::size_t eol = payload.find('\n', p);
    if (eol == std::string_view::npos) eol = payload.size();
    auto tok = split_ws(payload.substr(p, eol - p));
    p = eol + 1;
    if (tok.empty()) continue;
    if (k >= *points) {
      throw ParseError("PCD payload: more than POINTS " + std::to_string(*points) + " records");
    }
    if (tok.size() != column) {
      throw ParseError("PCD payload: record " + std::to_string(k) + " has " +
                       std::to_string(tok.size()) + " values, expected " +
                       std::to_string(column));
    }
    // Parse at the declared width so float32 text round-trips exactly.
    auto value = [&](const FieldLayout* f) -> double {
      std::string_view t = tok[f->column];
      auto bad = [&] {
        return ParseError("PCD payload: bad value '" + std::string(t) +
                          "' in record " + std::to_string(k));
      };
      if (f->type == 'F' && f->size == 4) {
        float v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw bad();
        return v;
      }
      double v = 0;
      auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw bad();
      return v;
    };
    auto& pt = pc.points[k];
    pt.x = value(fx);
    pt.y = value(fy);
    pt.z = value(fz);
    if (fi) pt.intensity = value(fi) * iscale;
    ++k;
  }
  if (k != *points) {
    throw ParseError("PCD payload: POINTS " + std::to_string(*points) +
                     " but found " + std::to_string(k) + " records");
  }
  return pc;
}

namespace pcd_detail {

inline void append_float(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<float>(v));
  out.append(buf.data(), res.ptr);
}

}  // namespace pcd_detail

/// Serializes with the canonical x y z intensity float32 layout. Ascii values
/// use the shortest text that round-trips each float exactly.
inline std::string write_pcd(const PointCloud& pc, PcdMode mode) {
  const std::size_t n = pc.size();
  const std::size_t w = pc.organized ? pc.organized->width : n;
  const std::size_t h = pc.organized ? pc.organized->height : 1;
  std::string out;
  out.reserve(160 + n * (mode == PcdMode::binary ? 16 : 40));
  out += "VERSION .7\n";
  out += "FIELDS x y z intensity\n";
  out += "SIZE 4 4 4 4\n";
  out += "TYPE F F F F\n";
  out += "COUNT 1 1 1 1\n";
  out += "WIDTH " + std::to_string(w) + "\n";
  out += "HEIGHT " + std::to_string(h) + "\n";
  out += "POINTS " + std::to_string(n) + "\n";
  out += mode == PcdMode::binary ? "DATA binary\n" : "DATA ascii\n";
  if (mode == PcdMode::binary) {
    for (const auto& p : pc.points) {
      store_le(out, static_cast<float>(p.x));
      store_le(out, static_cast<float>(p.y));
      store_le(out, static_cast<float>(p.z));
      store_le(out, static_cast<float>(p.intensity));
    }
  } else {
    for (const auto& p : pc.points) {
      pcd_detail::append_float(out, p.x);
      out += ' ';
      pcd_detail::append_float(out, p.y);
      out += ' ';
      pcd_detail::append_float(out, p.z);
      out += ' ';
      pcd_detail::append_float(out, p.intensity);
      out += '\n';
    }
  }
  return out;
}

}  // namespace liguard::io
