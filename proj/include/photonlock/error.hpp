#pragma once

#include <stdexcept>
#include <string>

namespace photonlock {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Requested device targets cannot be realized by a passive four-port.
class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

/// The controller could not (re)acquire the setpoint.
class LockLost : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem. `key` names the offending config key when one is
/// known; `line` is 1-based, 0 when the error is not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, std::string message, int line = 0)
      : Error(format(key, message, line)), key_(std::move(key)), message_(std::move(message)),
        line_(line) {}

  const std::string& key() const noexcept { return key_; }
  /// The message without the line and key prefixes.
  const std::string& message() const noexcept { return message_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& key, const std::string& message, int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!key.empty()) out += key + ": ";
    return out + message;
  }

  std::string key_;
  std::string message_;
  int line_;
};

}  // namespace photonlock
