#pragma once

#include <stdexcept>
#include <string>

namespace vaerl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Raised when an optimizer step or a loss produces NaN/Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

// Bad or unknown configuration keys. `key_path` is a dotted path like "env.horizon".
class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : Error(key_path.empty() ? what : key_path + ": " + what), key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

// A prerequisite artifact (checkpoint, dataset) is missing or incompatible.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

}  // namespace vaerl
