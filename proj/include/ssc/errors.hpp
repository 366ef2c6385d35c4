#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ssc {

// File-format violation. Carries the byte offset at which parsing failed.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

class SingularTransformError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class BehindCameraError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: diverged optimization, failed gradient check, non-finite result.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssc
