// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_CSV_HPP
#define AFFORD_CORE_CSV_HPP

// Minimal RFC 4180 style reading and writing: fields containing a comma,
// quote or newline are quoted, quotes doubled.

#include "afford/core/error.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace afford::csv {

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

/// Splits one record. Throws a ParseError for an unterminated quote.
inline std::vector<std::string> split(std::string_view line, std::uint64_t line_no = 0) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no, 0);
  out.push_back(std::move(cur));
  return out;
}

}  // namespace afford::csv

#endif  // AFFORD_CORE_CSV_HPP
