#pragma once

#include <stdexcept>

namespace fisher {

/// Invalid or inconsistent configuration (bad ranges, unknown names, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: calling an operation outside its contract.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fisher
