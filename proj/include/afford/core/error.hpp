// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_ERROR_HPP
#define AFFORD_CORE_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace afford {

enum class ErrorKind {
  invalid_argument,  // caller broke a precondition
  parse,             // malformed input file
  io,                // cannot open / write
  version,           // container version mismatch
  corrupt,           // checksum or structural damage in a container
  data,              // well-formed input whose content violates an invariant
};

/// Base exception for everything thrown by the library.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Parse failure with the location where it was detected. `line` is 1-based
/// for text sections and 0 inside binary payloads; `byte_offset` is always
/// measured from the start of the file.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::uint64_t line, std::uint64_t byte_offset)
      : Error(ErrorKind::parse, format(what, line, byte_offset)),
        line_(line),
        byte_offset_(byte_offset) {}

  std::uint64_t line() const noexcept { return line_; }
  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

private:
  static std::string format(const std::string& what, std::uint64_t line, std::uint64_t off) {
    std::string s = what + " (";
    if (line > 0) s += "line " + std::to_string(line) + ", ";
    s += "byte " + std::to_string(off) + ")";
    return s;
  }

  std::uint64_t line_;
  std::uint64_t byte_offset_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::invalid_argument, what);
}

}  // namespace afford

#endif  // AFFORD_CORE_ERROR_HPP
