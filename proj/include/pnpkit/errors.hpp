#pragma once

#include <stdexcept>
#include <string>

namespace pnpkit {

// Common base so callers can catch every library error with one handler.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A point projected with |depth| below the safe threshold.  Carries the index
// of the offending correspondence (-1 when projecting a lone point).
struct DegenerateDepth : Error {
  int index;
  explicit DegenerateDepth(int idx)
      : Error("degenerate depth at correspondence " + std::to_string(idx)), index(idx) {}
};

struct NonPositiveFocal : Error {
  explicit NonPositiveFocal(double f)
      : Error("focal length must be positive, got " + std::to_string(f)) {}
};

// Container sizes disagree (correspondence count vs. mask length, input vector
// vs. network fan-in, ...).
struct ShapeMismatch : Error {
  using Error::Error;
};

struct InsufficientPoints : Error {
  InsufficientPoints(int got, int need)
      : Error("need at least " + std::to_string(need) + " points, got " + std::to_string(got)) {}
};

// Point configuration leaves the solver without a usable basis (e.g. all
// world points collinear).
struct DegenerateConfiguration : Error {
  using Error::Error;
};

struct ResampleLimitExceeded : Error {
  explicit ResampleLimitExceeded(int limit)
      : Error("instance rejected more than " + std::to_string(limit) + " times") {}
};

struct MissingGroundTruth : Error {
  MissingGroundTruth() : Error("operation requires an instance with ground-truth pose") {}
};

// Training aborted on a non-finite loss; the last finite checkpoint is kept.
struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(long long update)
      : Error("non-finite loss at update " + std::to_string(update)), update_index(update) {}
  long long update_index;
};

struct UnknownMethod : Error {
  explicit UnknownMethod(const std::string& name) : Error("unknown method: " + name) {}
};

// Malformed file contents or config values (CLI exit code 1).
struct SchemaError : Error {
  using Error::Error;
};

// Filesystem-level failures (CLI exit code 2).
struct IoError : Error {
  using Error::Error;
};

}  // namespace pnpkit
