#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace nprobe::detail {

/// Shortest decimal that parses back to exactly `f`.
inline std::string shortest(float f) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, f);
  return std::string(buf, end);
}

inline std::string shortest(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, end);
}

/// The double whose shortest representation equals the float's shortest
/// representation. Lets nlohmann::json emit "0.1" for 0.1f instead of the
/// widened binary value.
inline double json_number(float f) {
  const auto s = shortest(f);
  double d = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), d);
  return d;
}

inline std::optional<float> parse_float(std::string_view s) {
  float f = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return f;
}

}  // namespace nprobe::detail
