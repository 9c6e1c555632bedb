#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace kinship::detail {

/// Shortest text that round-trips the double exactly (17 significant
/// digits); used everywhere a score lands in a CSV so reruns are
/// byte-identical.
inline std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = line.find(sep, begin);
    if (end == std::string::npos) {
      fields.push_back(line.substr(begin));
      break;
    }
    fields.push_back(line.substr(begin, end - begin));
    begin = end + 1;
  }
  return fields;
}

}  // namespace kinship::detail
