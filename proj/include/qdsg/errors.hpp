#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qdsg {

struct RetryExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateSpectrum : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; carries the offending field name.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct NoProgress : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qdsg
