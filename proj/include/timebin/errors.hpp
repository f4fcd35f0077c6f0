#pragma once

#include <stdexcept>
#include <string>

namespace timebin {

/// Invalid or inconsistent configuration (bad parameter values, schema
/// violations, unknown keys). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / stream failures. CLI maps this to exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Corrupt or inconsistent data (unsorted tag streams, truncated records).
/// Carries the offending record index when known. CLI exit code 4.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg, long long record = -1)
      : std::runtime_error(msg), record_index(record) {}
  long long record_index;
};

}  // namespace timebin
