#pragma once

#include <stdexcept>
#include <string>

namespace moeids {

/// Root of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is numerically degenerate (e.g. softmax over an all -inf row).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

/// CSV columns or encoded feature widths disagree with the flow schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

/// A serialized file is truncated or its checksum does not match.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied unusable input (empty dataset, missing file, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace moeids
