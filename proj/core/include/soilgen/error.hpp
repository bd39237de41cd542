#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace soilgen {

// Every failure raised by the library derives from Error. kind() is a short
// stable identifier used by the command-line tool for machine-readable output.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

#define SOILGEN_DEFINE_ERROR(Name, tag)                              \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(what) {}          \
    const char* kind() const noexcept override { return tag; }       \
  };

SOILGEN_DEFINE_ERROR(ShapeError, "shape")
SOILGEN_DEFINE_ERROR(ParameterError, "parameter")
SOILGEN_DEFINE_ERROR(InvalidAnnotationError, "invalid-annotation")
SOILGEN_DEFINE_ERROR(DataError, "data")
SOILGEN_DEFINE_ERROR(StateError, "state")
SOILGEN_DEFINE_ERROR(ValidationError, "validation")
SOILGEN_DEFINE_ERROR(DependencyError, "dependency")
SOILGEN_DEFINE_ERROR(FormatError, "format")
SOILGEN_DEFINE_ERROR(ManifestError, "manifest")
SOILGEN_DEFINE_ERROR(WriteError, "write")
SOILGEN_DEFINE_ERROR(ConfigError, "config")
SOILGEN_DEFINE_ERROR(UndefinedMetricError, "undefined-metric")

#undef SOILGEN_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& token, std::size_t position, const std::string& reason)
      : Error("cannot parse layer token '" + token + "' at position " + std::to_string(position) +
              ": " + reason),
        token_(token),
        position_(position) {}
  const char* kind() const noexcept override { return "parse"; }
  const std::string& token() const noexcept { return token_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string token_;
  std::size_t position_;
};

// Raised when a loss or gradient becomes non-finite during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  const char* kind() const noexcept override { return "divergence"; }
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace soilgen
