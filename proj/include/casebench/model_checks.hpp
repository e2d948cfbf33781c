#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>

namespace casebench {

/// Validates 0/1 labels against the row count and requires both classes.
/// Returns {negatives, positives}.
inline std::array<std::size_t, 2> check_binary_labels(std::span<const int> y, std::size_t rows, const char* who) {
  if (y.size() != rows) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(y.size()) + " labels for " +
                                std::to_string(rows) + " rows");
  }
  std::array<std::size_t, 2> counts{0, 0};
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1");
    ++counts[static_cast<std::size_t>(v)];
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw std::invalid_argument(std::string(who) + ": training labels contain a single class");
  }
  return counts;
}

}  // namespace casebench
