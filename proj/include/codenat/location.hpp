#ifndef CODENAT_LOCATION_HPP
#define CODENAT_LOCATION_HPP

#include <charconv>
#include <compare>
#include <string>
#include <string_view>

#include "codenat/error.hpp"

namespace codenat {

/// A source line, written as `file:line`.
struct Location {
  std::string file;
  int line = 0;

  auto operator<=>(const Location&) const = default;

  std::string str() const { return file + ":" + std::to_string(line); }
};

/// Parses `file:line`; the last colon separates the line number.
inline Location parse_location(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 ||
      colon + 1 == text.size()) {
    throw InputError("malformed location '" + std::string(text) +
                     "' (expected file:line)");
  }
  int line = 0;
  const auto digits = text.substr(colon + 1);
  const auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), line);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || line < 1) {
    throw InputError("malformed line number in location '" +
                     std::string(text) + "'");
  }
  return Location{std::string(text.substr(0, colon)), line};
}

}  // namespace codenat

#endif  // CODENAT_LOCATION_HPP
