#include "flowpersp/format.hpp"

#include <cstdio>

namespace flowpersp {

std::string format_sig(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value + 0.0);
  return buf;
}

}  // namespace flowpersp
