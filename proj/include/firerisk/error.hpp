#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace firerisk {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed PNG/JPEG stream. `offset()` is the byte position the decoder
/// had consumed when it gave up.
class DecodeError : public Error {
public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class UnsupportedFormatError : public Error {
public:
  using Error::Error;
};

/// An image tagged with one color space was passed where another is required.
class SpaceMismatchError : public Error {
public:
  using Error::Error;
};

class UnsupportedConversionError : public Error {
public:
  using Error::Error;
};

/// Input value outside the mathematical domain of a transform.
class DomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Carries every violation found, not just the first.
class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = std::to_string(v.size()) + " validation error(s)";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

} // namespace firerisk
