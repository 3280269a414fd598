#pragma once

#include <stdexcept>
#include <string>

namespace mmc {

/// Raised when a caller violates a documented precondition (shape, range, missing channel).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// A 3D point projected with non-positive depth in the camera frame.
class BehindCameraError : public std::domain_error {
 public:
  explicit BehindCameraError(const std::string& what) : std::domain_error(what) {}
};

/// Too few valid views to triangulate a point.
class UnderdeterminedError : public std::runtime_error {
 public:
  explicit UnderdeterminedError(const std::string& what) : std::runtime_error(what) {}
};

/// A non-finite value appeared in an autodiff primitive; `primitive()` names it.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string primitive, const std::string& phase)
      : std::runtime_error("non-finite value in primitive '" + primitive + "' during " + phase),
        primitive_(std::move(primitive)) {}
  const std::string& primitive() const { return primitive_; }

 private:
  std::string primitive_;
};

class ScalingError : public std::runtime_error {
 public:
  explicit ScalingError(const std::string& what) : std::runtime_error(what) {}
};

class SegmentationError : public std::runtime_error {
 public:
  explicit SegmentationError(const std::string& what) : std::runtime_error(what) {}
};

class AlignmentError : public std::runtime_error {
 public:
  explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file. Carries the location for diagnostics.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, std::size_t column, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        path_(path), line_(line), column_(column) {}
  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string path_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace mmc
