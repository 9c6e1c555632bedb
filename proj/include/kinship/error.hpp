#pragma once

#include <stdexcept>
#include <string>

namespace kinship {

/// Error raised by any module on invalid input, broken invariants or I/O
/// failure. The message names the offending entity (file, image id, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace kinship
