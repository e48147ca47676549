#pragma once

#include <stdexcept>
#include <string>

namespace tollplaza {

/// Frame arrived out of order, or with a gap where contiguity is required.
class StreamOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed trace line, config document or wire message.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation not allowed in the current lifecycle state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Duplicate key with a different payload, or mutation of an archived record.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Storage backend or archive I/O failed.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tollplaza
