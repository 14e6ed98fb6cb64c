#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace fedprint {

// CSV number format used across all outputs: '.' decimal separator,
// 9 significant digits.
inline std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string join_ids(const std::vector<int>& ids, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += sep;
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace fedprint
