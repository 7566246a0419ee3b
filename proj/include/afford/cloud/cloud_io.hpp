// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CLOUD_CLOUD_IO_HPP
#define AFFORD_CLOUD_CLOUD_IO_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/core/error.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace afford {

enum class CloudFormat { ply_ascii, ply_binary_le, pcd_ascii };

inline std::string_view to_string(CloudFormat f) {
  switch (f) {
    case CloudFormat::ply_ascii: return "ply-ascii";
    case CloudFormat::ply_binary_le: return "ply-binary-le";
    case CloudFormat::pcd_ascii: return "pcd-ascii";
  }
  return "?";
}

inline std::optional<CloudFormat> format_from_string(std::string_view s) {
  if (s == "ply-ascii") return CloudFormat::ply_ascii;
  if (s == "ply-binary-le") return CloudFormat::ply_binary_le;
  if (s == "pcd-ascii") return CloudFormat::pcd_ascii;
  return std::nullopt;
}

namespace io_detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Walks a buffer line by line, tracking 1-based line numbers and the byte
/// offset of the current line start.
class LineCursor {
public:
  explicit LineCursor(std::string_view data) : data_(data) {}

  bool next(std::string_view& line) {
    if (pos_ >= data_.size()) return false;
    line_start_ = pos_;
    ++line_no_;
    const auto nl = data_.find('\n', pos_);
    const auto end = nl == std::string_view::npos ? data_.size() : nl;
    line = data_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = nl == std::string_view::npos ? data_.size() : nl + 1;
    return true;
  }

  std::uint64_t line() const { return line_no_; }
  std::uint64_t line_start() const { return line_start_; }
  std::size_t position() const { return pos_; }

  [[noreturn]] void error(const std::string& what) const {
    throw ParseError(what, line_no_, line_start_);
  }

private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  std::uint64_t line_no_ = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& v) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

inline bool parse_u64(std::string_view tok, std::uint64_t& v) {
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

/// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), p);
}

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<ScalarType> ply_scalar(std::string_view t) {
  if (t == "char" || t == "int8") return ScalarType::i8;
  if (t == "uchar" || t == "uint8") return ScalarType::u8;
  if (t == "short" || t == "int16") return ScalarType::i16;
  if (t == "ushort" || t == "uint16") return ScalarType::u16;
  if (t == "int" || t == "int32") return ScalarType::i32;
  if (t == "uint" || t == "uint32") return ScalarType::u32;
  if (t == "float" || t == "float32") return ScalarType::f32;
  if (t == "double" || t == "float64") return ScalarType::f64;
  return std::nullopt;
}

inline std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

template <typename T>
double load_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

inline double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::i8: return load_as<std::int8_t>(p);
    case ScalarType::u8: return load_as<std::uint8_t>(p);
    case ScalarType::i16: return load_as<std::int16_t>(p);
    case ScalarType::u16: return load_as<std::uint16_t>(p);
    case ScalarType::i32: return load_as<std::int32_t>(p);
    case ScalarType::u32: return load_as<std::uint32_t>(p);
    case ScalarType::f32: return load_as<float>(p);
    case ScalarType::f64: return load_as<double>(p);
  }
  return 0.0;
}

// Column slots for the fields we understand; -1 when absent.
struct FieldSlots {
  std::array<int, 3> xyz{-1, -1, -1};
  std::array<int, 3> normal{-1, -1, -1};

  void assign(std::string_view name, int col) {
    if (name == "x") xyz[0] = col;
    else if (name == "y") xyz[1] = col;
    else if (name == "z") xyz[2] = col;
    else if (name == "nx" || name == "normal_x") normal[0] = col;
    else if (name == "ny" || name == "normal_y") normal[1] = col;
    else if (name == "nz" || name == "normal_z") normal[2] = col;
  }

  bool has_xyz() const { return xyz[0] >= 0 && xyz[1] >= 0 && xyz[2] >= 0; }
  bool has_normals() const { return normal[0] >= 0 && normal[1] >= 0 && normal[2] >= 0; }
};

inline void finish(PointCloud& cloud, std::uint64_t line, std::uint64_t offset) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!all_finite(cloud.points[i]))
      throw ParseError("non-finite coordinate in vertex " + std::to_string(i), line, offset);
  }
  try {
    cloud.validate();
  } catch (const Error& e) {
    throw ParseError(e.what(), line, offset);
  }
}

struct PlyProperty {
  std::string name;
  ScalarType type;
};

inline PointCloud parse_ply(const std::string& data, CloudFormat expected) {
  LineCursor cur(data);
  std::string_view line;
  if (!cur.next(line) || line != "ply") cur.error("missing 'ply' magic");

  std::optional<CloudFormat> fmt;
  std::string frame_id;
  std::uint64_t vertex_count = 0;
  bool have_vertex = false;
  bool in_vertex = false;
  std::vector<PlyProperty> props;
  bool ended = false;

  while (cur.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") {
      ended = true;
      break;
    }
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() >= 3 && tok[0] == "comment" && tok[1] == "frame_id") frame_id = std::string(tok[2]);
      continue;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) cur.error("malformed format line");
      if (tok[1] == "ascii") fmt = CloudFormat::ply_ascii;
      else if (tok[1] == "binary_little_endian") fmt = CloudFormat::ply_binary_le;
      else if (tok[1] == "binary_big_endian") cur.error("big-endian binary PLY is not supported");
      else cur.error("unknown PLY format '" + std::string(tok[1]) + "'");
      continue;
    }
    if (tok[0] == "element") {
      std::uint64_t count = 0;
      if (tok.size() != 3 || !parse_u64(tok[2], count)) cur.error("malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (have_vertex) cur.error("duplicate vertex element");
        have_vertex = true;
        vertex_count = count;
      } else if (count > 0) {
        cur.error("unsupported element type '" + std::string(tok[1]) + "'");
      }
      continue;
    }
    if (tok[0] == "property") {
      if (!have_vertex || !in_vertex) continue;  // zero-count foreign element
      if (tok.size() >= 2 && tok[1] == "list") cur.error("list properties are not supported in vertex element");
      if (tok.size() != 3) cur.error("malformed property line");
      const auto t = ply_scalar(tok[1]);
      if (!t) cur.error("unknown property type '" + std::string(tok[1]) + "'");
      props.push_back({std::string(tok[2]), *t});
      continue;
    }
    cur.error("unexpected header keyword '" + std::string(tok[0]) + "'");
  }
  if (!ended) cur.error("header is missing end_header");
  if (!fmt) cur.error("header is missing format line");
  if (*fmt != expected)
    cur.error("file is " + std::string(to_string(*fmt)) + " but " + std::string(to_string(expected)) +
              " was requested");
  if (!have_vertex) cur.error("no vertex element declared");

  FieldSlots slots;
  for (std::size_t i = 0; i < props.size(); ++i) slots.assign(props[i].name, static_cast<int>(i));
  if (!slots.has_xyz()) cur.error("vertex element does not declare x, y, z");

  PointCloud cloud;
  cloud.frame_id = frame_id;
  cloud.points.reserve(vertex_count);
  if (slots.has_normals()) cloud.normals.reserve(vertex_count);

  const std::size_t body = cur.position();
  if (*fmt == CloudFormat::ply_ascii) {
    std::vector<double> row(props.size());
    for (std::uint64_t v = 0; v < vertex_count; ++v) {
      if (!cur.next(line))
        throw ParseError("truncated payload: expected " + std::to_string(vertex_count) +
                             " vertices, found " + std::to_string(v),
                         cur.line() + 1, data.size());
      const auto tok = split_ws(line);
      if (tok.size() != props.size())
        cur.error("vertex " + std::to_string(v) + " has " + std::to_string(tok.size()) +
                  " values, expected " + std::to_string(props.size()));
      for (std::size_t i = 0; i < tok.size(); ++i) {
        if (!parse_double(tok[i], row[i])) cur.error("invalid number '" + std::string(tok[i]) + "'");
      }
      cloud.points.emplace_back(row[slots.xyz[0]], row[slots.xyz[1]], row[slots.xyz[2]]);
      if (slots.has_normals())
        cloud.normals.emplace_back(row[slots.normal[0]], row[slots.normal[1]], row[slots.normal[2]]);
    }
    finish(cloud, cur.line(), cur.line_start());
  } else {
    std::vector<std::size_t> offsets(props.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < props.size(); ++i) {
      offsets[i] = stride;
      stride += scalar_size(props[i].type);
    }
    const std::uint64_t available = data.size() - body;
    if (stride == 0 || available / stride < vertex_count) {
      const std::uint64_t complete = stride ? available / stride : 0;
      throw ParseError("truncated payload: expected " + std::to_string(vertex_count) +
                           " vertices, found " + std::to_string(complete),
                       0, body + complete * stride);
    }
    auto field = [&](const char* rec, int slot) {
      return load_scalar(props[slot].type, rec + offsets[slot]);
    };
    for (std::uint64_t v = 0; v < vertex_count; ++v) {
      const char* rec = data.data() + body + v * stride;
      cloud.points.emplace_back(field(rec, slots.xyz[0]), field(rec, slots.xyz[1]),
                                field(rec, slots.xyz[2]));
      if (slots.has_normals())
        cloud.normals.emplace_back(field(rec, slots.normal[0]), field(rec, slots.normal[1]),
                                   field(rec, slots.normal[2]));
    }
    finish(cloud, 0, body);
  }
  return cloud;
}

inline PointCloud parse_pcd(const std::string& data) {
  LineCursor cur(data);
  std::string_view line;
  std::vector<std::string> fields;
  std::vector<std::uint64_t> counts;
  std::optional<std::uint64_t> points, width, height;
  std::string frame_id;
  bool have_data = false;

  while (cur.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0].front() == '#') {
      if (tok.size() >= 3 && tok[1] == "frame_id") frame_id = std::string(tok[2]);
      continue;
    }
    const auto key = tok[0];
    if (key == "VERSION" || key == "SIZE" || key == "TYPE" || key == "VIEWPOINT") continue;
    if (key == "FIELDS") {
      for (std::size_t i = 1; i < tok.size(); ++i) fields.emplace_back(tok[i]);
      continue;
    }
    auto one_number = [&](std::optional<std::uint64_t>& dst) {
      std::uint64_t v = 0;
      if (tok.size() != 2 || !parse_u64(tok[1], v)) cur.error("malformed " + std::string(key) + " line");
      dst = v;
    };
    if (key == "COUNT") {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        std::uint64_t v = 0;
        if (!parse_u64(tok[i], v) || v == 0) cur.error("malformed COUNT line");
        counts.push_back(v);
      }
      continue;
    }
    if (key == "WIDTH") { one_number(width); continue; }
    if (key == "HEIGHT") { one_number(height); continue; }
    if (key == "POINTS") { one_number(points); continue; }
    if (key == "DATA") {
      if (tok.size() != 2) cur.error("malformed DATA line");
      if (tok[1] != "ascii") cur.error("unsupported PCD data encoding '" + std::string(tok[1]) + "'");
      have_data = true;
      break;
    }
    cur.error("unexpected header keyword '" + std::string(key) + "'");
  }
  if (!have_data) cur.error("header is missing DATA line");
  if (fields.empty()) cur.error("header is missing FIELDS line");
  if (!counts.empty() && counts.size() != fields.size()) cur.error("COUNT does not match FIELDS");
  if (!points) {
    if (!width) cur.error("header is missing POINTS and WIDTH");
    points = *width * height.value_or(1);
  }

  // Expand multi-count fields into columns.
  FieldSlots slots;
  int col = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto c = counts.empty() ? 1 : counts[i];
    if (c == 1) slots.assign(fields[i], col);
    col += static_cast<int>(c);
  }
  const auto columns = static_cast<std::size_t>(col);
  if (!slots.has_xyz()) cur.error("FIELDS does not declare x, y, z");

  PointCloud cloud;
  cloud.frame_id = frame_id;
  cloud.points.reserve(*points);
  std::vector<double> row(columns);
  for (std::uint64_t v = 0; v < *points; ++v) {
    if (!cur.next(line))
      throw ParseError("truncated payload: expected " + std::to_string(*points) + " points, found " +
                           std::to_string(v),
                       cur.line() + 1, data.size());
    const auto tok = split_ws(line);
    if (tok.size() != columns)
      cur.error("point " + std::to_string(v) + " has " + std::to_string(tok.size()) +
                " values, expected " + std::to_string(columns));
    for (std::size_t i = 0; i < columns; ++i) {
      if (!parse_double(tok[i], row[i])) cur.error("invalid number '" + std::string(tok[i]) + "'");
    }
    cloud.points.emplace_back(row[slots.xyz[0]], row[slots.xyz[1]], row[slots.xyz[2]]);
    if (slots.has_normals())
      cloud.normals.emplace_back(row[slots.normal[0]], row[slots.normal[1]], row[slots.normal[2]]);
  }
  finish(cloud, cur.line(), cur.line_start());
  return cloud;
}

}  // namespace io_detail

/// Reads a pointcloud. The header must agree with `format`.
inline PointCloud parse_cloud(const std::filesystem::path& path, CloudFormat format) {
  const std::string data = io_detail::read_file(path);
  if (format == CloudFormat::pcd_ascii) return io_detail::parse_pcd(data);
  return io_detail::parse_ply(data, format);
}

/// Sniffs the header to pick a format.
inline CloudFormat detect_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open: " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line == "ply") {
    while (std::getline(in, line)) {
      if (line.rfind("format ascii", 0) == 0) return CloudFormat::ply_ascii;
      if (line.rfind("format binary_little_endian", 0) == 0) return CloudFormat::ply_binary_le;
      if (line.rfind("format", 0) == 0 || line.rfind("end_header", 0) == 0) break;
    }
    throw ParseError("unsupported or missing PLY format line", 2, 4);
  }
  return CloudFormat::pcd_ascii;
}

inline PointCloud parse_cloud(const std::filesystem::path& path) {
  return parse_cloud(path, detect_format(path));
}

/// Writes coordinates as doubles, so binary files round-trip bit-exactly and
/// ascii files round-trip through shortest-form decimal. Each entry of
/// `comments` becomes one header comment line.
inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format,
                        const std::vector<std::string>& comments = {}) {
  cloud.validate();
  for (const auto& c : comments) require(c.find_first_of("\r\n") == std::string::npos, "write_cloud: multi-line comment");
  const bool normals = cloud.has_normals();
  std::string out;
  if (format == CloudFormat::pcd_ascii) {
    out += "# .PCD v0.7 - Point Cloud Data file format\n";
    if (!cloud.frame_id.empty()) out += "# frame_id " + cloud.frame_id + "\n";
    for (const auto& c : comments) out += "# " + c + "\n";
    out += "VERSION 0.7\n";
    out += normals ? "FIELDS x y z normal_x normal_y normal_z\nSIZE 8 8 8 8 8 8\nTYPE F F F F F F\nCOUNT 1 1 1 1 1 1\n"
                   : "FIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n";
    out += "WIDTH " + std::to_string(cloud.size()) + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
    out += "POINTS " + std::to_string(cloud.size()) + "\nDATA ascii\n";
  } else {
    out += "ply\n";
    out += format == CloudFormat::ply_ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    if (!cloud.frame_id.empty()) out += "comment frame_id " + cloud.frame_id + "\n";
    for (const auto& c : comments) out += "comment " + c + "\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
    out += "end_header\n";
  }

  if (format == CloudFormat::ply_binary_le) {
    auto put = [&out](double v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int a = 0; a < 3; ++a) put(cloud.points[i][a]);
      if (normals)
        for (int a = 0; a < 3; ++a) put(cloud.normals[i][a]);
    }
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        if (a) out += ' ';
        io_detail::append_double(out, cloud.points[i][a]);
      }
      if (normals) {
        for (int a = 0; a < 3; ++a) {
          out += ' ';
          io_detail::append_double(out, cloud.normals[i][a]);
        }
      }
      out += '\n';
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace afford

#endif  // AFFORD_CLOUD_CLOUD_IO_HPP
