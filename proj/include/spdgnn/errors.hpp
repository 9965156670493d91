#pragma once

#include <stdexcept>
#include <string>

namespace spdgnn {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteError : Error {
  using Error::Error;
};
struct NoConvergenceError : Error {
  using Error::Error;
};
struct NotPositiveDefiniteError : Error {
  using Error::Error;
};
struct NotSymmetricError : Error {
  using Error::Error;
};
struct OverflowError : Error {
  using Error::Error;
};
struct DimensionMismatchError : Error {
  using Error::Error;
};
struct ShapeMismatchError : Error {
  using Error::Error;
};
struct NotScalarLossError : Error {
  using Error::Error;
};
struct LabelOutOfRangeError : Error {
  using Error::Error;
};
struct NegativeLambdaError : Error {
  using Error::Error;
};
struct OutsideBallError : Error {
  using Error::Error;
};
struct RankDeficientError : Error {
  using Error::Error;
};
struct EmptyGraphError : Error {
  using Error::Error;
};

// Dataset / IO errors carry enough context to locate the offending line.
struct DatasetError : Error {
  using Error::Error;
};
struct ParseError : DatasetError {
  using DatasetError::DatasetError;
};
struct IndexOutOfRangeError : DatasetError {
  using DatasetError::DatasetError;
};
struct InconsistentCountsError : DatasetError {
  using DatasetError::DatasetError;
};
struct DisconnectedError : Error {
  using Error::Error;
};
struct TooLargeForExactError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct DivergedTrainingError : Error {
  using Error::Error;
};

}  // namespace spdgnn
