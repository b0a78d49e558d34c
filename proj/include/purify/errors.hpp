#pragma once

#include <stdexcept>
#include <string>

namespace purify {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can report one machine-readable line per failure.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

struct ModelError : Error {
  explicit ModelError(const std::string& what) : Error("model", what) {}
};

struct ConstructionError : Error {
  explicit ConstructionError(const std::string& what) : Error("construction", what) {}
};

struct SingularityError : Error {
  SingularityError(const std::string& what, double smallest_singular_value)
      : Error("singularity", what), smallest_singular_value_(smallest_singular_value) {}
  double smallest_singular_value() const noexcept { return smallest_singular_value_; }

 private:
  double smallest_singular_value_;
};

struct HeadMismatchError : Error {
  explicit HeadMismatchError(const std::string& what) : Error("head-mismatch", what) {}
};

struct LabelError : Error {
  explicit LabelError(const std::string& what) : Error("label", what) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

struct CalibrationError : Error {
  CalibrationError(const std::string& what, double loss_at_low, double loss_at_high)
      : Error("calibration", what), loss_at_low_(loss_at_low), loss_at_high_(loss_at_high) {}
  double loss_at_low() const noexcept { return loss_at_low_; }
  double loss_at_high() const noexcept { return loss_at_high_; }

 private:
  double loss_at_low_;
  double loss_at_high_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

}  // namespace purify
