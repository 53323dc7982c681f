#pragma once

#include <stdexcept>
#include <string>

namespace tcd {

// Bad arguments use std::invalid_argument directly.

/// Raised when an operation is attempted on an object in the wrong state
/// (moved-from cache, finished session, foreign cache handle).
class state_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration problem. `key()` names the offending setting.
class config_error : public std::runtime_error {
 public:
  config_error(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace tcd
