#pragma once

#include <stdexcept>
#include <string>

namespace ndt {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// dataset
class ParseError : public Error {
 public:
  using Error::Error;
};
class MissingLabelError : public Error {
 public:
  using Error::Error;
};
class NonNumericError : public Error {
 public:
  using Error::Error;
};
class AllColumnsRemovedError : public Error {
 public:
  using Error::Error;
};
class DegenerateSplitError : public Error {
 public:
  using Error::Error;
};
class EmptyPartitionError : public Error {
 public:
  using Error::Error;
};

// tree / structure
class LeafNotInFrontierError : public Error {
 public:
  using Error::Error;
};
class CapacityExceededError : public Error {
 public:
  using Error::Error;
};

// training / reporting
class NonpositiveBaselineError : public Error {
 public:
  using Error::Error;
};

// io
class IoError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ndt
