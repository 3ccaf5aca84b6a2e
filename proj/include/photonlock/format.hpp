#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace photonlock {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t value) { return std::to_string(value); }

}  // namespace photonlock
