#pragma once

#include <stdexcept>
#include <string>

namespace hmrf_icp {

// Root of every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent sizes or parameters passed between components.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// Fewer than three inlier correspondences selected for a fit.
class DegenerateSelectionError : public Error {
 public:
  using Error::Error;
};

// Inliers are coincident or collinear; the fit has no unique rotation.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// Synthetic scene could not reach the requested overlap.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. line() is 1-based, or 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hmrf_icp
